use super::data::{
    check_shapes, numerical_rank, probe_matrix, BoundarySpectralData, ProbeFrame, SpectralData,
    SpectralGroup,
};
use super::eigen::{identify, EigenEstimate, RateKey};
use super::laplace::{laplace_transform, log_points};
use super::model::ExponentialModel;
use super::pencil::{matrix_pencil_with, window_indices, PencilOptions};
use super::refine::{refine, ModalBasis};
use super::rational::{rational_pole_fit_with, PoleFit, RationalOptions};
use crate::error::{invalid, Error, Result};
use crate::forward::{KernelKind, TimeSignal};
use crate::linalg::svd;
use crate::manifold::{DiscreteManifold, RegionMask};
use crate::probe::{Bump, PacketResponse};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryPath {
    /// Exponential fit of the post-source time series.
    Pencil,
    /// Rational fit of bump-normalized Laplace samples.
    Rational,
}

/// Measured responses to a set of probes.
#[derive(Debug, Clone, Copy)]
pub enum Responses<'a> {
    /// One signal per probe, all driven by the same bump.
    Battery {
        signals: &'a [TimeSignal],
        bump: &'a Bump,
    },
    /// Per-packet responses split out of one probe train.
    Packets(&'a [PacketResponse]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOptions {
    pub path: RecoveryPath,
    pub model_order: usize,
    pub max_groups: Option<usize>,
    /// Entries from different probes closer than this (relative) form one group.
    pub cluster_rtol: f64,
    /// Cross-probe spread above this (relative) flags the group.
    pub lambda_rtol: f64,
    /// Groups whose matrix is this small relative to the largest are dropped.
    pub min_relative_norm: f64,
    pub laplace_points: Vec<f64>,
    pub pencil: PencilOptions,
    pub rational: RationalOptions,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            path: RecoveryPath::Pencil,
            model_order: 16,
            max_groups: None,
            cluster_rtol: 1e-3,
            lambda_rtol: 1e-4,
            min_relative_norm: 1e-4,
            laplace_points: log_points(0.5, 20.0, 120),
            pencil: PencilOptions::default(),
            rational: RationalOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupDiagnostic {
    pub lambda: f64,
    pub residual: f64,
    pub condition: f64,
    pub pair_consistency: f64,
    /// Relative spread of the eigenvalue across probes.
    pub probe_spread: f64,
    /// Distance of the rates from `-1`.
    pub margin: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct Recovery<T> {
    pub data: T,
    pub diagnostics: Vec<GroupDiagnostic>,
    pub models: Vec<ExponentialModel>,
    pub pole_fits: Vec<PoleFit>,
}

#[derive(Debug, Clone)]
struct Term {
    estimate: EigenEstimate,
    values: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
struct FitQuality {
    residual: f64,
    condition: f64,
    flagged: bool,
}

fn rate_keys_from_model(model: &ExponentialModel) -> Vec<RateKey> {
    let mut out: Vec<RateKey> = Vec::new();
    for c in model.components.iter().filter(|c| c.rate.im >= 0.0) {
        match out.iter_mut().find(|k| k.rate == c.rate) {
            Some(k) => k.power = k.power.max(c.power),
            None => out.push(RateKey {
                rate: c.rate,
                power: c.power,
            }),
        }
    }
    out
}

fn rate_keys_from_poles(fit: &PoleFit) -> Vec<RateKey> {
    fit.poles
        .iter()
        .filter(|p| p.location.im >= 0.0)
        .map(|p| RateKey {
            rate: p.location,
            power: p.order - 1,
        })
        .collect()
}

/// Relative distance within which a lone slow rate is taken to duplicate a
/// better-determined candidate.
const SLOW_RATE_SHADOW: f64 = 0.1;

/// Eigenvalue candidates from fitted rates, merged within the clustering tolerance.
struct Candidates {
    seeds: Vec<EigenEstimate>,
    /// Lone rates in `(-2, -1)` near a seed: `λ = -μ²/(1+μ)` fixes them poorly,
    /// so they are only tried if they improve the fit.
    reserve: Vec<EigenEstimate>,
}

fn initial_estimates(keys: &[RateKey], rtol: f64) -> Candidates {
    let ids = identify(keys);
    let slow = |members: &[usize]| {
        let [m] = members else { return false };
        let k = &keys[*m];
        k.rate.im == 0.0 && k.power == 0 && k.rate.re > -2.0
    };
    let anchors: Vec<f64> = ids
        .iter()
        .filter(|i| !slow(&i.members))
        .map(|i| i.estimate.lambda)
        .collect();
    let (mut seeds, mut reserve): (Vec<_>, Vec<_>) = ids.into_iter().partition(|i| {
        !slow(&i.members)
            || !anchors
                .iter()
                .any(|a| (a - i.estimate.lambda).abs() <= SLOW_RATE_SHADOW * a)
    });
    let tidy = |v: &mut Vec<super::eigen::Identified>| -> Vec<EigenEstimate> {
        let mut est: Vec<EigenEstimate> = v.drain(..).map(|i| i.estimate).collect();
        est.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        est.dedup_by(|a, b| (a.lambda - b.lambda).abs() <= rtol * b.lambda);
        est
    };
    Candidates {
        seeds: tidy(&mut seeds),
        reserve: tidy(&mut reserve),
    }
}

/// Window rows used for refinement: every early sample, where the fast
/// components live, then an even stride over the rest.
fn fit_rows(len: usize, budget: usize) -> Vec<usize> {
    let head = (budget / 3).min(len);
    if len <= budget {
        return (0..len).collect();
    }
    let stride = (len - head).div_ceil(budget - head);
    (0..head).chain((head..len).step_by(stride)).collect()
}

/// Refines the candidates against the data; each surviving eigenvalue carries
/// the channel weights of its modal response.
fn refined_terms(basis: &ModalBasis, y: &DMatrix<f64>, candidates: &Candidates) -> (Vec<Term>, f64) {
    let lambdas = |v: &[EigenEstimate]| v.iter().map(|e| e.lambda).collect::<Vec<f64>>();
    let fit = refine(basis, y, &lambdas(&candidates.seeds), &lambdas(&candidates.reserve));
    let terms = fit
        .lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let nearest = candidates
                .seeds
                .iter()
                .chain(&candidates.reserve)
                .min_by(|a, b| (a.lambda - lambda).abs().total_cmp(&(b.lambda - lambda).abs()))
                .copied()
                .expect("refinement keeps a subset of the candidates");
            Term {
                estimate: EigenEstimate { lambda, ..nearest },
                values: fit.weights.row(i).transpose(),
            }
        })
        .collect();
    (terms, fit.residual)
}

/// Per-probe terms, each tagged with its probe index and fit quality.
struct TaggedTerm {
    probe: usize,
    term: Term,
    quality: FitQuality,
}

fn check_battery(signals: &[TimeSignal], channels: &[usize]) -> Result<()> {
    for s in signals {
        if s.channels != channels {
            return Err(Error::ChannelMismatch(
                "response channels differ from the observation region".into(),
            ));
        }
        if s.grid != signals[0].grid {
            return invalid("battery responses use different time grids");
        }
    }
    Ok(())
}

fn collect_terms(
    responses: &Responses,
    channels: &[usize],
    kind: KernelKind,
    opts: &RecoveryOptions,
    models: &mut Vec<ExponentialModel>,
    pole_fits: &mut Vec<PoleFit>,
) -> Result<Vec<TaggedTerm>> {
    let nc = channels.len();
    let mut out = Vec::new();
    match responses {
        Responses::Battery { signals, bump } => {
            if signals.is_empty() {
                return Ok(out);
            }
            check_battery(signals, channels)?;
            let refs: Vec<&TimeSignal> = signals.iter().collect();
            let joint = TimeSignal::concat_channels(&refs)?;
            let (terms, quality) = match opts.path {
                RecoveryPath::Pencil => {
                    let window = (bump.support().1, joint.grid.horizon());
                    let model = matrix_pencil_with(&joint, window, opts.model_order, &opts.pencil)?;
                    let estimates = initial_estimates(&rate_keys_from_model(&model), opts.cluster_rtol);
                    let (i0, i1) = window_indices(&joint, window);
                    let rows = fit_rows(i1 + 1 - i0, opts.pencil.max_samples);
                    let y = DMatrix::from_fn(rows.len(), joint.values.ncols(), |r, c| {
                        joint.values[(i0 + rows[r], c)]
                    });
                    let dt = joint.grid.dt();
                    let offsets: Vec<f64> = rows.iter().map(|&r| r as f64 * dt).collect();
                    let basis = ModalBasis::Time {
                        kind,
                        bump,
                        t_ref: joint.grid.time(i0),
                        offsets: &offsets,
                    };
                    let (terms, residual) = refined_terms(&basis, &y, &estimates);
                    let q = FitQuality {
                        residual,
                        condition: model.condition,
                        flagged: model.flagged || residual > opts.pencil.residual_threshold,
                    };
                    for j in 0..signals.len() {
                        models.push(model.channel_block(j * nc, nc));
                    }
                    (terms, q)
                }
                RecoveryPath::Rational => {
                    let samples = laplace_transform(&joint, &opts.laplace_points, Some(bump))?;
                    let fit = rational_pole_fit_with(&samples, opts.model_order, &opts.rational)?;
                    let estimates = initial_estimates(&rate_keys_from_poles(&fit), opts.cluster_rtol);
                    // undo the bump division in the fit so that points where the
                    // bump transform is tiny do not dominate
                    let weights: Vec<f64> = samples
                        .points
                        .iter()
                        .map(|&s| bump.laplace(Complex64::new(s, 0.0)).re)
                        .collect();
                    let peak = weights.iter().copied().fold(0.0, f64::max);
                    let weights: Vec<f64> = weights.iter().map(|w| w / peak).collect();
                    let mut y = samples.values.clone();
                    for (r, w) in weights.iter().enumerate() {
                        y.row_mut(r).scale_mut(*w);
                    }
                    let basis = ModalBasis::Laplace {
                        kind,
                        points: &samples.points,
                        weights: &weights,
                    };
                    let (terms, residual) = refined_terms(&basis, &y, &estimates);
                    let q = FitQuality {
                        residual,
                        condition: 1.0,
                        flagged: fit.flagged || residual > opts.rational.residual_threshold,
                    };
                    pole_fits.push(fit);
                    (terms, q)
                }
            };
            for term in terms {
                for j in 0..signals.len() {
                    out.push(TaggedTerm {
                        probe: j,
                        term: Term {
                            estimate: term.estimate,
                            values: term.values.rows(j * nc, nc).into_owned(),
                        },
                        quality,
                    });
                }
            }
        }
        Responses::Packets(packets) => {
            if opts.path != RecoveryPath::Pencil {
                return invalid("packet responses are recovered through the time-domain path");
            }
            for (j, p) in packets.iter().enumerate() {
                if p.model.channels != channels {
                    return Err(Error::ChannelMismatch(
                        "packet model channels differ from the observation region".into(),
                    ));
                }
                models.push(p.model.clone());
                let estimates = initial_estimates(&rate_keys_from_model(&p.model), opts.cluster_rtol);
                let rows = fit_rows(p.samples.nrows(), opts.pencil.max_samples);
                let y = p.samples.select_rows(rows.iter());
                let dt = p.grid.dt();
                let offsets: Vec<f64> = rows.iter().map(|&r| r as f64 * dt).collect();
                let basis = ModalBasis::Time {
                    kind,
                    bump: &p.bump,
                    t_ref: p.window.0,
                    offsets: &offsets,
                };
                let (terms, residual) = refined_terms(&basis, &y, &estimates);
                let q = FitQuality {
                    residual,
                    condition: p.model.condition,
                    flagged: p.model.flagged || residual > opts.pencil.residual_threshold,
                };
                for term in terms {
                    out.push(TaggedTerm {
                        probe: j,
                        term,
                        quality: q,
                    });
                }
            }
        }
    }
    Ok(out)
}

struct Cluster {
    lambda: f64,
    columns: DMatrix<f64>,
    diagnostic: GroupDiagnostic,
}

fn cluster_terms(terms: Vec<TaggedTerm>, probes: usize, nc: usize, opts: &RecoveryOptions) -> Vec<Cluster> {
    let mut terms = terms;
    terms.sort_by(|a, b| a.term.estimate.lambda.total_cmp(&b.term.estimate.lambda));
    let mut clusters: Vec<Vec<TaggedTerm>> = Vec::new();
    for t in terms {
        match clusters.last_mut() {
            Some(c)
                if {
                    let last = c.last().expect("nonempty").term.estimate.lambda;
                    (t.term.estimate.lambda - last).abs() <= opts.cluster_rtol * last
                } =>
            {
                c.push(t)
            }
            _ => clusters.push(vec![t]),
        }
    }
    clusters
        .into_iter()
        .map(|members| {
            let mut columns = DMatrix::zeros(nc, probes);
            let mut best_norm = vec![-1.0; probes];
            let (mut num, mut den) = (0.0, 0.0);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut diag = GroupDiagnostic {
                lambda: 0.0,
                residual: 0.0,
                condition: 1.0,
                pair_consistency: 0.0,
                probe_spread: 0.0,
                margin: f64::INFINITY,
                flagged: false,
            };
            for m in &members {
                let e = m.term.estimate;
                let norm = m.term.values.norm();
                if norm > best_norm[m.probe] {
                    best_norm[m.probe] = norm;
                    columns.set_column(m.probe, &m.term.values);
                }
                num += e.lambda * norm;
                den += norm;
                lo = lo.min(e.lambda);
                hi = hi.max(e.lambda);
                diag.residual = diag.residual.max(m.quality.residual);
                diag.condition = diag.condition.max(m.quality.condition);
                diag.pair_consistency = diag.pair_consistency.max(e.consistency);
                diag.margin = diag.margin.min(e.margin);
                                diag.flagged |= m.quality.flagged || e.flagged;
            }
            let lambda = if den > 0.0 { num / den } else { (lo + hi) / 2.0 };
            diag.lambda = lambda;
            diag.probe_spread = (hi - lo) / lambda;
            diag.flagged |= diag.probe_spread > opts.lambda_rtol;
            Cluster {
                lambda,
                columns,
                diagnostic: diag,
            }
        })
        .collect()
}

fn finish(
    mut groups: Vec<(SpectralGroup, GroupDiagnostic)>,
    opts: &RecoveryOptions,
) -> (Vec<SpectralGroup>, Vec<GroupDiagnostic>) {
    let peak = groups
        .iter()
        .map(|(g, _)| g.matrix.norm())
        .fold(0.0, f64::max);
    groups.retain(|(g, _)| g.lambda > 0.0 && g.matrix.norm() > opts.min_relative_norm * peak);
    groups.sort_by(|a, b| a.0.lambda.total_cmp(&b.0.lambda));
    if let Some(k) = opts.max_groups {
        groups.truncate(k);
    }
    groups.into_iter().unzip()
}

/// Spectral data `{(λ, P_{W,k})}` from responses to interior probes.
///
/// Each matrix is assembled on the probe span: with `Y` the recovered images
/// `P ξ_i`, the result is `Π P Π` for the mass-orthogonal projector `Π` onto
/// the span of the probes.
pub fn assemble_source_spectral_data(
    manifold: &DiscreteManifold,
    w: &RegionMask,
    probes: &[Vec<f64>],
    responses: &Responses,
    opts: &RecoveryOptions,
) -> Result<Recovery<SpectralData>> {
    let mut data = SpectralData::empty(w, manifold);
    data.lambda_rtol = opts.lambda_rtol;
    let (mut models, mut pole_fits) = (Vec::new(), Vec::new());
    let count = match responses {
        Responses::Battery { signals, .. } => signals.len(),
        Responses::Packets(p) => p.len(),
    };
    if count != probes.len() {
        return invalid(format!("{} probes but {count} responses", probes.len()));
    }
    if probes.is_empty() {
        return Ok(Recovery {
            data,
            diagnostics: Vec::new(),
            models,
            pole_fits,
        });
    }
    let frame = ProbeFrame::new(probe_matrix(&data.channels, probes), &data.weights)?;
    let nc = data.channels.len();
    let terms = collect_terms(responses, &data.channels, KernelKind::Source, opts, &mut models, &mut pole_fits)?;
    let groups = cluster_terms(terms, probes.len(), nc, opts)
        .into_iter()
        .map(|c| {
            let matrix = frame.compress(&c.columns);
            (
                SpectralGroup {
                    lambda: c.lambda,
                    multiplicity: numerical_rank(&matrix),
                    matrix,
                    residual: c.diagnostic.residual,
                    flagged: c.diagnostic.flagged,
                },
                c.diagnostic,
            )
        })
        .collect();
    let (groups, diagnostics) = finish(groups, opts);
    data.groups = groups;
    check_shapes(nc, nc, &data.groups)?;
    Ok(Recovery {
        data,
        diagnostics,
        models,
        pole_fits,
    })
}

/// Boundary spectral data `{(λ, Φ_k)}` from Neumann responses on `S_out` to
/// Dirichlet probes on `S_in`.
pub fn assemble_boundary_spectral_data(
    manifold: &DiscreteManifold,
    s_in: &RegionMask,
    s_out: &RegionMask,
    probes: &[Vec<f64>],
    responses: &Responses,
    opts: &RecoveryOptions,
) -> Result<Recovery<BoundarySpectralData>> {
    let mut data = BoundarySpectralData::empty(s_in, s_out);
    data.lambda_rtol = opts.lambda_rtol;
    let (mut models, mut pole_fits) = (Vec::new(), Vec::new());
    let count = match responses {
        Responses::Battery { signals, .. } => signals.len(),
        Responses::Packets(p) => p.len(),
    };
    if count != probes.len() {
        return invalid(format!("{} probes but {count} responses", probes.len()));
    }
    if probes.is_empty() {
        return Ok(Recovery {
            data,
            diagnostics: Vec::new(),
            models,
            pole_fits,
        });
    }
    // probe values times the boundary measure on S_in
    let measure: Vec<f64> = data
        .cols
        .iter()
        .map(|&n| {
            let b = manifold.boundary_position(n).expect("validated S_in");
            manifold.boundary_nodes()[b].measure
        })
        .collect();
    let mut weighted = probe_matrix(&data.cols, probes);
    for (r, m) in measure.iter().enumerate() {
        weighted.row_mut(r).scale_mut(*m);
    }
    let dec = svd(&weighted)?;
    let rank = dec.rank(1e-10);
    if rank < data.cols.len() {
        return Err(Error::SingularProbes(format!(
            "probes span {rank} of {} S_in channels",
            data.cols.len()
        )));
    }
    let pinv = dec.pinv(1e-12);
    let nr = data.rows.len();
    let terms = collect_terms(responses, &data.rows, KernelKind::Boundary, opts, &mut models, &mut pole_fits)?;
    let overlap = data.overlap();
    let groups = cluster_terms(terms, probes.len(), nr, opts)
        .into_iter()
        .map(|c| {
            let mut matrix = &c.columns * &pinv;
            for &(rx, cx) in &overlap {
                for &(ry, cy) in &overlap {
                    let avg = 0.5 * (matrix[(rx, cy)] + matrix[(ry, cx)]);
                    matrix[(rx, cy)] = avg;
                    matrix[(ry, cx)] = avg;
                }
            }
            (
                SpectralGroup {
                    lambda: c.lambda,
                    multiplicity: numerical_rank(&matrix),
                    matrix,
                    residual: c.diagnostic.residual,
                    flagged: c.diagnostic.flagged,
                },
                c.diagnostic,
            )
        })
        .collect();
    let (groups, diagnostics) = finish(groups, opts);
    data.groups = groups;
    check_shapes(nr, data.cols.len(), &data.groups)?;
    Ok(Recovery {
        data,
        diagnostics,
        models,
        pole_fits,
    })
}
