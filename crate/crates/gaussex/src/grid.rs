//! Finite discretizations of the index sets used by the models.
//!
//! A [`GridSpec`] materializes its points eagerly. Standard constructors
//! order points lexicographically; [`GridSpec::refined`] appends the new
//! midpoints after the existing points instead, so that a refinement shares
//! its leading block of points (and hence, with the per-replication RNG
//! streams of the sampler, its Gaussian values) with the grid it refines.

use crate::error::{Error, Result};

/// Kind of index set a grid discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// A 1-D interval `[lo, hi]`.
    Interval,
    /// An axis-aligned box in `R^d`.
    Hyperrectangle,
    /// The ordered simplex `0 <= t_1 <= ... <= t_n <= 1`.
    Simplex,
    /// The product of spherical angles and a time interval.
    SphereTime,
}

/// A finite grid over an index set.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub kind: GridKind,
    /// Representative mesh per axis (the coarsest spacing for graded grids).
    pub per_axis_mesh: Vec<f64>,
    /// Per-axis bounds `[lo, hi]`.
    pub bounds: Vec<[f64; 2]>,
    /// Materialized points; unique, in a deterministic order.
    pub points: Vec<Vec<f64>>,
}

const DIV_TOL: f64 = 1e-9;

fn steps_for(lo: f64, hi: f64, mesh: f64) -> Result<usize> {
    if !(mesh > 0.0) {
        return Err(Error::Domain(format!("mesh must be positive, got {mesh}")));
    }
    if !(hi > lo) {
        return Err(Error::Domain(format!("need hi > lo, got [{lo}, {hi}]")));
    }
    let n = ((hi - lo) / mesh).round();
    if n < 1.0 || ((hi - lo) - n * mesh).abs() > DIV_TOL {
        return Err(Error::Usage(format!(
            "mesh {mesh} does not divide the interval [{lo}, {hi}]"
        )));
    }
    Ok(n as usize)
}

fn check_unique(points: &[Vec<f64>]) -> Result<()> {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| lex_cmp(a, b));
    for w in sorted.windows(2) {
        if lex_cmp(w[0], w[1]) == std::cmp::Ordering::Equal {
            return Err(Error::Domain(format!(
                "duplicate grid point {:?}",
                w[0]
            )));
        }
    }
    Ok(())
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y).expect("grid coordinates must not be NaN") {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    a.len().cmp(&b.len())
}

impl GridSpec {
    /// Uniform grid on `[lo, hi]` with the given mesh; mesh must divide the
    /// interval length.
    pub fn interval(lo: f64, hi: f64, mesh: f64) -> Result<Self> {
        let n = steps_for(lo, hi, mesh)?;
        let mut points: Vec<Vec<f64>> = (0..n).map(|i| vec![lo + i as f64 * mesh]).collect();
        points.push(vec![hi]);
        Ok(GridSpec {
            kind: GridKind::Interval,
            per_axis_mesh: vec![mesh],
            bounds: vec![[lo, hi]],
            points,
        })
    }

    /// Interval grid from explicit points; points are sorted and must be
    /// unique.
    pub fn interval_from_points(mut ts: Vec<f64>) -> Result<Self> {
        if ts.is_empty() {
            return Err(Error::Domain("interval grid needs at least one point".into()));
        }
        ts.sort_by(|a, b| a.partial_cmp(b).expect("grid coordinates must not be NaN"));
        let points: Vec<Vec<f64>> = ts.iter().map(|&t| vec![t]).collect();
        check_unique(&points)?;
        let lo = ts[0];
        let hi = *ts.last().unwrap();
        let mesh = ts
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        Ok(GridSpec {
            kind: GridKind::Interval,
            per_axis_mesh: vec![mesh],
            bounds: vec![[lo, hi]],
            points,
        })
    }

    /// Interval grid on `[lo, hi]` geometrically refined toward `focus`
    /// (which must be `lo` or `hi`): `levels` nested windows shrinking by
    /// `ratio`, each covered uniformly by an equal share of the point budget.
    pub fn geometric_interval(
        lo: f64,
        hi: f64,
        n_points: usize,
        focus: f64,
        ratio: f64,
        levels: usize,
    ) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Domain(format!("need hi > lo, got [{lo}, {hi}]")));
        }
        if !(ratio > 1.0) || levels == 0 || n_points < levels + 1 {
            return Err(Error::Usage(
                "geometric grid needs ratio > 1, levels >= 1 and enough points".into(),
            ));
        }
        let at_lo = (focus - lo).abs() < DIV_TOL;
        let at_hi = (focus - hi).abs() < DIV_TOL;
        if !at_lo && !at_hi {
            return Err(Error::Usage(format!(
                "focus {focus} must be an endpoint of [{lo}, {hi}]"
            )));
        }
        let per_level = n_points / levels;
        let mut ts: Vec<f64> = Vec::new();
        for l in 0..levels {
            let extent = (hi - lo) / ratio.powi(l as i32);
            for i in 0..=per_level {
                let off = extent * i as f64 / per_level as f64;
                ts.push(if at_lo { lo + off } else { hi - off });
            }
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let coarse_mesh = (hi - lo) / per_level as f64;
        let points: Vec<Vec<f64>> = ts.iter().map(|&t| vec![t]).collect();
        check_unique(&points)?;
        Ok(GridSpec {
            kind: GridKind::Interval,
            per_axis_mesh: vec![coarse_mesh],
            bounds: vec![[lo, hi]],
            points,
        })
    }

    /// Lattice over an axis-aligned box; lexicographic point order.
    pub fn hyperrectangle(bounds: Vec<[f64; 2]>, meshes: Vec<f64>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != meshes.len() {
            return Err(Error::Usage(
                "hyperrectangle needs one mesh per bounded axis".into(),
            ));
        }
        let mut axes: Vec<Vec<f64>> = Vec::with_capacity(bounds.len());
        for (b, &m) in bounds.iter().zip(meshes.iter()) {
            let n = steps_for(b[0], b[1], m)?;
            let mut ax: Vec<f64> = (0..n).map(|i| b[0] + i as f64 * m).collect();
            ax.push(b[1]);
            axes.push(ax);
        }
        let mut points = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        loop {
            points.push(idx.iter().enumerate().map(|(d, &i)| axes[d][i]).collect());
            let mut d = axes.len();
            loop {
                if d == 0 {
                    return Ok(GridSpec {
                        kind: GridKind::Hyperrectangle,
                        per_axis_mesh: meshes,
                        bounds,
                        points,
                    });
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    /// Lattice discretization of the ordered simplex
    /// `0 <= t_1 <= ... <= t_n <= 1` with the given mesh.
    pub fn simplex(n: usize, mesh: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("simplex dimension must be >= 1".into()));
        }
        let steps = steps_for(0.0, 1.0, mesh)?;
        let mut points = Vec::new();
        let mut idx = vec![0usize; n];
        'outer: loop {
            points.push(idx.iter().map(|&i| (i as f64 * mesh).min(1.0)).collect());
            let mut d = n;
            loop {
                if d == 0 {
                    break 'outer;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] <= steps {
                    // Keep the ordering constraint: later coordinates start
                    // at the incremented value.
                    for j in d + 1..n {
                        idx[j] = idx[d];
                    }
                    break;
                }
            }
        }
        Ok(GridSpec {
            kind: GridKind::Simplex,
            per_axis_mesh: vec![mesh; n],
            bounds: vec![[0.0, 1.0]; n],
            points,
        })
    }

    /// Simplex grid from explicit points (for graded corner grids); points
    /// are sorted lexicographically and validated against the simplex
    /// constraints.
    pub fn simplex_from_points(n: usize, mut points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("simplex grid needs at least one point".into()));
        }
        for p in &points {
            if p.len() != n {
                return Err(Error::Domain(format!(
                    "simplex point {:?} has dimension {} != {n}",
                    p,
                    p.len()
                )));
            }
            let mut prev = 0.0;
            for &c in p {
                if c < prev - 1e-12 || c > 1.0 + 1e-12 {
                    return Err(Error::Domain(format!(
                        "point {p:?} violates the simplex ordering constraint"
                    )));
                }
                prev = c;
            }
        }
        points.sort_by(|a, b| lex_cmp(a, b));
        check_unique(&points)?;
        Ok(GridSpec {
            kind: GridKind::Simplex,
            per_axis_mesh: vec![f64::MIN_POSITIVE; n],
            bounds: vec![[0.0, 1.0]; n],
            points,
        })
    }

    /// Product grid over spherical angles and a time set: `n - 2` polar
    /// angles in `[0, pi]`, one azimuthal angle in `[0, 2*pi)`, and the given
    /// times. `n` is the ambient dimension of the chi process (`n >= 2`).
    pub fn sphere_time(n: usize, mesh_theta: f64, times: &[f64]) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain("sphere-time grid needs n >= 2".into()));
        }
        if times.is_empty() {
            return Err(Error::Domain("sphere-time grid needs at least one time".into()));
        }
        let polar_steps = steps_for(0.0, std::f64::consts::PI, mesh_theta)?;
        let azim_steps = steps_for(0.0, 2.0 * std::f64::consts::PI, mesh_theta)?;
        let mut axes: Vec<Vec<f64>> = Vec::new();
        for _ in 0..n.saturating_sub(2) {
            let mut ax: Vec<f64> = (0..polar_steps).map(|i| i as f64 * mesh_theta).collect();
            ax.push(std::f64::consts::PI);
            axes.push(ax);
        }
        // Azimuthal axis is half-open: skip the duplicate endpoint 2*pi.
        axes.push((0..azim_steps).map(|i| i as f64 * mesh_theta).collect());
        axes.push(times.to_vec());

        let mut points = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        'outer: loop {
            points.push(idx.iter().enumerate().map(|(d, &i)| axes[d][i]).collect());
            let mut d = axes.len();
            loop {
                if d == 0 {
                    break 'outer;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        check_unique(&points)?;
        let mut bounds = vec![[0.0, std::f64::consts::PI]; n.saturating_sub(2)];
        bounds.push([0.0, 2.0 * std::f64::consts::PI]);
        let t_lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
        let t_hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        bounds.push([t_lo, t_hi]);
        let mut meshes = vec![mesh_theta; n - 1];
        meshes.push(
            times
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(0.0_f64, f64::max)
                .max(f64::MIN_POSITIVE),
        );
        Ok(GridSpec {
            kind: GridKind::SphereTime,
            per_axis_mesh: meshes,
            bounds,
            points,
        })
    }

    /// Halves the mesh of an interval grid by appending midpoints of
    /// consecutive points after the existing ones. The original points form a
    /// prefix, which preserves pathwise coupling under the sampler's
    /// per-replication RNG streams.
    pub fn refined(&self) -> Result<GridSpec> {
        if self.kind != GridKind::Interval {
            return Err(Error::Usage("refined() supports interval grids only".into()));
        }
        let mut sorted: Vec<f64> = self.points.iter().map(|p| p[0]).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut points = self.points.clone();
        for w in sorted.windows(2) {
            points.push(vec![0.5 * (w[0] + w[1])]);
        }
        check_unique(&points)?;
        Ok(GridSpec {
            kind: GridKind::Interval,
            per_axis_mesh: vec![self.per_axis_mesh[0] / 2.0],
            bounds: self.bounds.clone(),
            points,
        })
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coarsest per-axis mesh, used by coverage checks.
    pub fn mesh_hint(&self) -> f64 {
        self.per_axis_mesh.iter().cloned().fold(0.0, f64::max)
    }

    /// One-line description for result records.
    pub fn summary(&self) -> String {
        format!(
            "{:?} grid, {} points, mesh {:?}, bounds {:?}",
            self.kind,
            self.points.len(),
            self.per_axis_mesh,
            self.bounds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_endpoints_exact() {
        let g = GridSpec::interval(0.0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.points[0][0], 0.0);
        assert_eq!(g.points[10][0], 1.0);
    }

    #[test]
    fn interval_mesh_must_divide() {
        assert!(GridSpec::interval(0.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn duplicate_points_rejected() {
        assert!(GridSpec::interval_from_points(vec![0.1, 0.2, 0.1]).is_err());
    }

    #[test]
    fn simplex_points_ordered() {
        let g = GridSpec::simplex(2, 0.25).unwrap();
        for p in &g.points {
            assert!(0.0 <= p[0] && p[0] <= p[1] && p[1] <= 1.0);
        }
        // Lattice points of the ordered simplex with 5 levels per axis.
        assert_eq!(g.len(), 15);
        // Lexicographic ordering.
        for w in g.points.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn geometric_interval_concentrates_at_focus() {
        let g = GridSpec::geometric_interval(0.0, 1.0, 100, 0.0, 2.0, 4).unwrap();
        let near = g.points.iter().filter(|p| p[0] <= 0.25).count();
        let far = g.points.iter().filter(|p| p[0] > 0.75).count();
        assert!(near > 2 * far);
        assert_eq!(g.points[0][0], 0.0);
        assert_eq!(g.points.last().unwrap()[0], 1.0);
    }

    #[test]
    fn refined_keeps_prefix() {
        let g = GridSpec::interval(0.0, 1.0, 0.5).unwrap();
        let f = g.refined().unwrap();
        assert_eq!(&f.points[..g.len()], &g.points[..]);
        assert_eq!(f.len(), 2 * g.len() - 1);
        assert_eq!(f.per_axis_mesh[0], 0.25);
    }

    #[test]
    fn sphere_time_azimuth_half_open() {
        let times = [0.0, 0.5, 1.0];
        let g = GridSpec::sphere_time(2, std::f64::consts::PI / 2.0, &times).unwrap();
        // 4 azimuthal angles (2*pi excluded) times 3 times.
        assert_eq!(g.len(), 12);
        assert!(g
            .points
            .iter()
            .all(|p| p[0] < 2.0 * std::f64::consts::PI));
    }

    #[test]
    fn simplex_from_points_validates() {
        assert!(GridSpec::simplex_from_points(2, vec![vec![0.5, 0.2]]).is_err());
        let g = GridSpec::simplex_from_points(2, vec![vec![0.2, 0.5], vec![0.1, 0.9]]).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.points[0], vec![0.1, 0.9]);
    }
}
