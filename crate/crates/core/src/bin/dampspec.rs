fn main() {
    std::process::exit(dampspec::cli::main_with_args(std::env::args_os()));
}
