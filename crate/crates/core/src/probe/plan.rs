use super::bump::{make_bump, Bump};
use crate::error::{invalid, Error, Result};
use crate::forward::{SourceKind, SourceSpec, TimeGrid};
use crate::manifold::{DiscreteManifold, RegionMask, SpectralDecomposition};
use crate::linalg::svd;
use nalgebra::DMatrix;

/// Rejects linearly dependent node profiles.
fn check_independent(profiles: &[Vec<f64>]) -> Result<()> {
    let Some(first) = profiles.first() else {
        return Ok(());
    };
    if profiles.iter().any(|p| p.len() != first.len()) {
        return invalid("probe profiles have different lengths");
    }
    let m = DMatrix::from_fn(first.len(), profiles.len(), |i, j| profiles[j][i]);
    let sv = svd(&m)?.s;
    let (lo, hi) = sv
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if profiles.len() > first.len() || !(lo > 1e-10 * hi) {
        return Err(Error::SingularProbes(
            "probe profiles are linearly dependent".into(),
        ));
    }
    Ok(())
}

/// Single-measurement schedule: packet `k` fires bump `h_k` with profile `ψ_k`,
/// supported in `(t_{k-1}, t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePlan {
    packets: Vec<Bump>,
    breakpoints: Vec<f64>,
    basis: Vec<Vec<f64>>,
    kind: SourceKind,
    horizon: f64,
}

impl ProbePlan {
    pub fn new(
        packets: Vec<Bump>,
        breakpoints: Vec<f64>,
        basis: Vec<Vec<f64>>,
        kind: SourceKind,
        horizon: f64,
    ) -> Result<Self> {
        let k = packets.len();
        if k == 0 {
            return Err(Error::RejectedPlan("plan has no packets".into()));
        }
        if basis.len() != k || breakpoints.len() != k + 1 {
            return Err(Error::RejectedPlan(format!(
                "{k} packets need {k} profiles and {} breakpoints",
                k + 1
            )));
        }
        if breakpoints[0] != 0.0 || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::RejectedPlan("breakpoints must start at 0 and increase".into()));
        }
        if breakpoints[k] > horizon {
            return Err(Error::RejectedPlan("last breakpoint exceeds the horizon".into()));
        }
        for (i, b) in packets.iter().enumerate() {
            let (t0, t1) = b.support();
            if t0 < breakpoints[i] || t1 > breakpoints[i + 1] {
                return Err(Error::RejectedPlan(format!(
                    "packet {i} support ({t0}, {t1}) leaves ({}, {})",
                    breakpoints[i],
                    breakpoints[i + 1]
                )));
            }
        }
        check_independent(&basis)?;
        Ok(Self {
            packets,
            breakpoints,
            basis,
            kind,
            horizon,
        })
    }

    /// Packets of width `width` starting `lead` after each breakpoint, with
    /// breakpoints every `spacing`.
    pub fn evenly_spaced(
        basis: Vec<Vec<f64>>,
        kind: SourceKind,
        spacing: f64,
        lead: f64,
        width: f64,
        power: u32,
    ) -> Result<Self> {
        if !(lead > 0.0 && lead + width < spacing) {
            return Err(Error::RejectedPlan(
                "packet must fit strictly inside its slot".into(),
            ));
        }
        let k = basis.len();
        let packets = (0..k)
            .map(|i| {
                let t0 = i as f64 * spacing + lead;
                make_bump(t0, t0 + width, power)
            })
            .collect::<Result<Vec<_>>>()?;
        let breakpoints = (0..=k).map(|i| i as f64 * spacing).collect();
        Self::new(packets, breakpoints, basis, kind, k as f64 * spacing)
    }

    pub fn packet_count(&self) -> usize {
        self.packets.len()
    }

    pub fn packets(&self) -> &[Bump] {
        &self.packets
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// End of the trailing listening window.
    pub fn listening_end(&self) -> f64 {
        2.0 * self.horizon
    }

    /// One separable source per packet.
    pub fn sources(&self) -> Vec<SourceSpec> {
        self.packets
            .iter()
            .zip(&self.basis)
            .map(|(b, psi)| SourceSpec {
                temporal: *b,
                spatial: psi.clone(),
                kind: self.kind,
            })
            .collect()
    }
}

/// Probes sharing one temporal bump.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBattery {
    bump: Bump,
    profiles: Vec<Vec<f64>>,
    kind: SourceKind,
}

impl ProbeBattery {
    pub fn new(bump: Bump, profiles: Vec<Vec<f64>>, kind: SourceKind) -> Result<Self> {
        check_independent(&profiles)?;
        Ok(Self {
            bump,
            profiles,
            kind,
        })
    }

    pub fn bump(&self) -> &Bump {
        &self.bump
    }

    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn sources(&self) -> Vec<SourceSpec> {
        self.profiles
            .iter()
            .map(|p| SourceSpec {
                temporal: self.bump,
                spatial: p.clone(),
                kind: self.kind,
            })
            .collect()
    }
}

/// `count` indicator profiles on consecutive runs of W, each made
/// mass-orthogonal to constants on W. W is cut into `count + 1` runs and the
/// last one is left out so the profiles stay independent.
pub fn indicator_basis(
    manifold: &DiscreteManifold,
    w: &RegionMask,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    let nodes = w.nodes();
    if count == 0 || count + 1 > nodes.len() {
        return invalid(format!(
            "cannot cut {} W nodes into {} runs",
            nodes.len(),
            count + 1
        ));
    }
    let mass = manifold.mass();
    let total: f64 = nodes.iter().map(|&n| mass[n]).sum();
    let runs = count + 1;
    Ok((0..count)
        .map(|j| {
            let lo = j * nodes.len() / runs;
            let hi = (j + 1) * nodes.len() / runs;
            let part: f64 = nodes[lo..hi].iter().map(|&n| mass[n]).sum();
            let mut v = vec![0.0; manifold.node_count()];
            for &n in nodes {
                v[n] = -part / total;
            }
            for &n in &nodes[lo..hi] {
                v[n] += 1.0;
            }
            v
        })
        .collect())
}

/// Unit profiles at each node of a boundary patch.
pub fn nodal_basis(manifold: &DiscreteManifold, patch: &RegionMask) -> Vec<Vec<f64>> {
    patch
        .nodes()
        .iter()
        .map(|&n| {
            let mut v = vec![0.0; manifold.node_count()];
            v[n] = 1.0;
            v
        })
        .collect()
}

/// Node profiles of the given modes (zero on eliminated boundary nodes).
pub fn mode_profiles(
    manifold: &DiscreteManifold,
    decomp: &SpectralDecomposition,
    modes: std::ops::Range<usize>,
) -> Vec<Vec<f64>> {
    modes
        .map(|k| {
            (0..manifold.node_count())
                .map(|n| decomp.node_value(k, n))
                .collect()
        })
        .collect()
}

/// A packet train sampled on a grid: `h(t_n, x)` row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrain {
    pub grid: TimeGrid,
    /// One row per time sample, one column per manifold node.
    pub values: DMatrix<f64>,
    /// Index of the packet active at each sample.
    pub active: Vec<Option<usize>>,
    sources: Vec<SourceSpec>,
}

impl ProbeTrain {
    pub fn sources(&self) -> &[SourceSpec] {
        &self.sources
    }

    /// The train as one separable source when it has a single packet.
    pub fn single_source(&self) -> Option<&SourceSpec> {
        match self.sources.as_slice() {
            [s] => Some(s),
            _ => None,
        }
    }
}

/// Samples `h = Σ h_k ψ_k` on `grid`, which must cover the plan horizon.
pub fn build_probe(plan: &ProbePlan, grid: &TimeGrid) -> Result<ProbeTrain> {
    if grid.horizon() + 1e-12 < plan.horizon() {
        return invalid("time grid does not cover the plan horizon");
    }
    let nodes = plan.basis[0].len();
    let mut values = DMatrix::zeros(grid.len(), nodes);
    let mut active = vec![None; grid.len()];
    for (n, slot) in active.iter_mut().enumerate() {
        let t = grid.time(n);
        for (k, b) in plan.packets.iter().enumerate() {
            let (t0, t1) = b.support();
            if t > t0 && t < t1 {
                if slot.is_some() {
                    return Err(Error::RejectedPlan("overlapping packet supports".into()));
                }
                *slot = Some(k);
                let a = b.value(t);
                for (x, psi) in plan.basis[k].iter().enumerate() {
                    values[(n, x)] = a * psi;
                }
            }
        }
    }
    Ok(ProbeTrain {
        grid: *grid,
        values,
        active,
        sources: plan.sources(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::is_zero_mean;
    use crate::manifold::{build_manifold, ManifoldSpec};

    #[test]
    fn indicator_profiles_are_zero_mean_and_independent() {
        let (m, _) = build_manifold(&ManifoldSpec::circle(32)).unwrap();
        let w = RegionMask::arc(&m, 0, 16).unwrap();
        let basis = indicator_basis(&m, &w, 4).unwrap();
        assert_eq!(basis.len(), 4);
        for v in &basis {
            assert!(is_zero_mean(m.mass(), v));
            assert!((0..32).all(|n| w.contains(n) || v[n] == 0.0));
        }
        let bump = make_bump(0.5, 1.5, 4).unwrap();
        assert!(ProbeBattery::new(bump, basis.clone(), SourceKind::Interior).is_ok());
        let mut dup = basis.clone();
        dup.push(basis[0].clone());
        assert!(ProbeBattery::new(bump, dup, SourceKind::Interior).is_err());
        assert!(indicator_basis(&m, &w, 16).is_err());
    }

    #[test]
    fn plan_validation() {
        let basis = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let ok = ProbePlan::evenly_spaced(basis.clone(), SourceKind::Boundary, 4.0, 0.5, 1.0, 4).unwrap();
        assert_eq!(ok.breakpoints(), &[0.0, 4.0, 8.0]);
        assert_eq!(ok.horizon(), 8.0);
        let b0 = make_bump(0.5, 2.0, 4).unwrap();
        let b1 = make_bump(1.5, 3.0, 4).unwrap();
        let overlap = ProbePlan::new(vec![b0, b1], vec![0.0, 1.8, 4.0], basis, SourceKind::Boundary, 4.0);
        assert!(matches!(overlap, Err(Error::RejectedPlan(_))));
    }

    #[test]
    fn train_has_one_active_packet() {
        let basis = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let plan = ProbePlan::evenly_spaced(basis, SourceKind::Boundary, 3.0, 0.5, 1.5, 4).unwrap();
        let grid = TimeGrid::covering(0.01, 9.0).unwrap();
        let train = build_probe(&plan, &grid).unwrap();
        let n = grid.index_at_or_after(4.25);
        assert_eq!(train.active[n], Some(1));
        let row = train.values.row(n);
        assert!(row[1] > 0.0 && row[0] == 0.0 && row[2] == 0.0);
        assert!(train.single_source().is_none());
        let single = ProbePlan::evenly_spaced(vec![vec![1.0]], SourceKind::Boundary, 3.0, 0.5, 1.5, 4).unwrap();
        let t1 = build_probe(&single, &grid).unwrap();
        assert_eq!(t1.single_source().unwrap().temporal, *single.packets().first().unwrap());
    }
}
