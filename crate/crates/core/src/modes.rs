//! Normal modes of a rigid plate standing on vertical springs.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Energy fraction above which a single coordinate names the mode.
pub const DOMINANCE_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateSpring {
    /// Attachment point, x forward (m).
    pub x: f64,
    /// Attachment point, y to the left (m).
    pub y: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateModel {
    pub mass: f64,
    pub i_pitch: f64,
    pub i_roll: f64,
    pub springs: Vec<PlateSpring>,
}

impl PlateModel {
    /// Uniform `2a × 2b` plate with four equal springs at its corners.
    pub fn uniform(mass: f64, a: f64, b: f64, k: f64) -> Self {
        let springs = [(a, b), (a, -b), (-a, b), (-a, -b)]
            .iter()
            .map(|&(x, y)| PlateSpring { x, y, k })
            .collect();
        Self {
            mass,
            i_pitch: mass * a * a / 3.0,
            i_roll: mass * b * b / 3.0,
            springs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.i_pitch > 0.0 && self.i_roll > 0.0) {
            return Err(invalid("plate mass and inertias must be positive"));
        }
        if self.springs.is_empty() {
            return Err(invalid("plate needs at least one spring"));
        }
        if self.springs.iter().any(|s| !(s.k > 0.0) || !s.x.is_finite() || !s.y.is_finite()) {
            return Err(invalid("plate springs need k > 0 and finite positions"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLabel {
    /// All legs in phase (stotting / pronking).
    Stott,
    Bound,
    Roll,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalMode {
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// (heave, pitch, roll) components, M-normalised.
    pub shape: Vec<f64>,
    pub label: ModeLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub modes: Vec<NormalMode>,
}

/// Mass and stiffness matrices in (heave, pitch, roll) coordinates.
pub fn assemble(plate: &PlateModel) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    plate.validate()?;
    let m = Matrix3::from_diagonal(&Vector3::new(plate.mass, plate.i_pitch, plate.i_roll));
    let mut k = Matrix3::zeros();
    for s in &plate.springs {
        // Small-angle vertical deflection at the attachment point.
        let c = Vector3::new(1.0, -s.x, s.y);
        k += s.k * c * c.transpose();
    }
    Ok((m, k))
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn forward_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

fn backward_solve_transposed(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
/// Returns eigenvalues and eigenvectors as columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Energy fractions of each coordinate in `v` under mass matrix `m`.
fn energy_fractions(v: &[f64], m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let v = DVector::from_column_slice(v);
    let mv = m * &v;
    let total = v.dot(&mv);
    if !(total > 0.0) {
        return Err(invalid("mode shape must be non-zero"));
    }
    Ok((0..v.len()).map(|i| v[i] * mv[i] / total).collect())
}

/// Names a (heave, pitch, roll) mode shape by its dominant coordinate.
pub fn classify_mode(v: &[f64], m: &DMatrix<f64>) -> Result<ModeLabel> {
    if v.len() != 3 || m.nrows() != 3 {
        return Err(invalid("mode classification needs 3 coordinates"));
    }
    let e = energy_fractions(v, m)?;
    Ok(if e[0] > DOMINANCE_THRESHOLD {
        ModeLabel::Stott
    } else if e[1] > DOMINANCE_THRESHOLD {
        ModeLabel::Bound
    } else if e[2] > DOMINANCE_THRESHOLD {
        ModeLabel::Roll
    } else {
        ModeLabel::Mixed
    })
}

/// Solves `K v = ω² M v`, modes sorted by frequency and M-orthonormal.
pub fn normal_modes(m: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<ModeSet> {
    let n = m.nrows();
    if m.ncols() != n || k.nrows() != n || k.ncols() != n {
        return Err(invalid("mass and stiffness matrices must be square and equal size"));
    }
    let l = cholesky(m)?;
    // A = L⁻¹ K L⁻ᵀ, symmetrised against round-off.
    let y = forward_solve(&l, k);
    let a = forward_solve(&l, &y.transpose());
    let a = 0.5 * (&a + a.transpose());
    let (vals, vecs) = jacobi_eigen(&a);
    let shapes = backward_solve_transposed(&l, &vecs);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let mut modes = Vec::with_capacity(n);
    for i in order {
        let mut shape: Vec<f64> = shapes.column(i).iter().copied().collect();
        // Sign convention: largest component positive.
        let lead = shape.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            shape.iter_mut().for_each(|x| *x = -*x);
        }
        let label = if n == 3 {
            classify_mode(&shape, m)?
        } else {
            ModeLabel::Mixed
        };
        modes.push(NormalMode {
            omega: vals[i].max(0.0).sqrt(),
            shape,
            label,
        });
    }
    Ok(ModeSet { modes })
}

/// Convenience wrapper from a plate description.
pub fn plate_modes(plate: &PlateModel) -> Result<(ModeSet, DMatrix<f64>, DMatrix<f64>)> {
    let (m, k) = assemble(plate)?;
    let (m, k) = (DMatrix::from_column_slice(3, 3, m.as_slice()), DMatrix::from_column_slice(3, 3, k.as_slice()));
    Ok((normal_modes(&m, &k)?, m, k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalResponse {
    pub dt: f64,
    /// `coords[j][n]`: modal coordinate of mode j at step n.
    pub coords: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// `energy[j][n] = ½q̇² + ½ω²q²`.
    pub energy: Vec<Vec<f64>>,
}

/// Integrates the decoupled modal oscillators under sampled forcing.
///
/// `forcing[n]` is the generalised force at `t = n·dt`; it is linearly
/// interpolated inside each RK4 step. `initial` gives `(q, q̇)` per mode.
pub fn modal_response(
    modes: &ModeSet,
    zeta: &[f64],
    forcing: &[Vec<f64>],
    initial: &[(f64, f64)],
    dt: f64,
) -> Result<ModalResponse> {
    let nm = modes.modes.len();
    if zeta.len() != nm || initial.len() != nm {
        return Err(invalid("need one damping ratio and one initial condition per mode"));
    }
    if forcing.len() < 2 || !(dt > 0.0) {
        return Err(invalid("forcing needs at least two samples and dt > 0"));
    }
    if forcing.iter().any(|f| f.len() != modes.modes[0].shape.len()) {
        return Err(invalid("forcing vectors must match the mode dimension"));
    }
    let steps = forcing.len() - 1;
    let mut coords = vec![Vec::with_capacity(steps + 1); nm];
    let mut velocities = vec![Vec::with_capacity(steps + 1); nm];
    let mut energy = vec![Vec::with_capacity(steps + 1); nm];
    for (j, mode) in modes.modes.iter().enumerate() {
        let w = mode.omega;
        let c = 2.0 * zeta[j] * w;
        let project = |f: &[f64]| mode.shape.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        let modal_force: Vec<f64> = forcing.iter().map(|f| project(f)).collect();
        let (mut q, mut v) = initial[j];
        let acc = |q: f64, v: f64, f: f64| f - c * v - w * w * q;
        for n in 0..=steps {
            coords[j].push(q);
            velocities[j].push(v);
            energy[j].push(0.5 * v * v + 0.5 * w * w * q * q);
            if n == steps {
                break;
            }
            let (f0, f1) = (modal_force[n], modal_force[n + 1]);
            let fm = 0.5 * (f0 + f1);
            let (k1q, k1v) = (v, acc(q, v, f0));
            let (k2q, k2v) = (v + 0.5 * dt * k1v, acc(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v, fm));
            let (k3q, k3v) = (v + 0.5 * dt * k2v, acc(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v, fm));
            let (k4q, k4v) = (v + dt * k3v, acc(q + dt * k3q, v + dt * k3v, f1));
            q += dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if !(q.is_finite() && v.is_finite()) {
                return Err(Error::NonFinite { time: (n + 1) as f64 * dt });
            }
        }
    }
    Ok(ModalResponse {
        dt,
        coords,
        velocities,
        energy,
    })
}

/// Side and front views of each mode: the undeflected plate in grey and the
/// deflected plate in colour.
pub fn mode_sketch(plate: &PlateModel, modes: &ModeSet) -> String {
    let a = plate.springs.iter().map(|s| s.x.abs()).fold(0.0, f64::max).max(1e-9);
    let b = plate.springs.iter().map(|s| s.y.abs()).fold(0.0, f64::max).max(1e-9);
    let panel_w = 200.0;
    let width = panel_w * modes.modes.len().max(1) as f64;
    let mut out = String::new();
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="260" font-family="sans-serif" font-size="12"><rect width="{width}" height="260" fill="white"/>"#
    );
    for (i, mode) in modes.modes.iter().enumerate() {
        let ox = i as f64 * panel_w + 20.0;
        let (h, p, r) = (mode.shape[0], mode.shape[1], mode.shape[2]);
        // Normalise the largest corner deflection to 30 px.
        let corners = [(a, b), (a, -b), (-a, b), (-a, -b)];
        let peak = corners
            .iter()
            .map(|&(x, y)| (h - p * x + r * y).abs())
            .fold(0.0, f64::max)
            .max(1e-12);
        let s = 30.0 / peak;
        let view = |out: &mut String, cy: f64, half: f64, slope: f64, label: &str| {
            let (x0, x1) = (ox, ox + 160.0);
            let _ = write!(out, r##"<line x1="{x0}" y1="{cy}" x2="{x1}" y2="{cy}" stroke="#bbbbbb" stroke-width="6"/>"##);
            let (z0, z1) = (s * (h - slope * half), s * (h + slope * half));
            let _ = write!(
                out,
                r##"<line x1="{x0}" y1="{:.2}" x2="{x1}" y2="{:.2}" stroke="#1f77b4" stroke-width="6"/>"##,
                cy - z0,
                cy - z1
            );
            let _ = write!(out, r#"<text x="{x0}" y="{}">{label}</text>"#, cy + 45.0);
        };
        // Side view runs rear to front, front view right to left.
        view(&mut out, 80.0, a, -p, "side");
        view(&mut out, 190.0, b, r, "front");
        let _ = write!(
            out,
            r#"<text x="{ox}" y="20">{:?}  ω = {:.3} rad/s</text>"#,
            mode.label, mode.omega
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual(m: &DMatrix<f64>, k: &DMatrix<f64>, mode: &NormalMode) -> f64 {
        let v = DVector::from_column_slice(&mode.shape);
        (k * &v - mode.omega * mode.omega * (m * &v)).norm()
    }

    #[test]
    fn single_spring_at_origin() {
        let plate = PlateModel {
            mass: 2.0,
            i_pitch: 0.1,
            i_roll: 0.05,
            springs: vec![PlateSpring { x: 0.0, y: 0.0, k: 300.0 }],
        };
        let (_, k) = assemble(&plate).unwrap();
        assert_eq!(k, Matrix3::from_diagonal(&Vector3::new(300.0, 0.0, 0.0)));
    }

    #[test]
    fn symmetric_layout_decouples() {
        let (_, k) = assemble(&PlateModel::uniform(3.0, 0.2, 0.1, 500.0)).unwrap();
        let expected = Matrix3::from_diagonal(&Vector3::new(2000.0, 2000.0 * 0.04, 2000.0 * 0.01));
        assert!((k - expected).abs().max() < 1e-12);
    }

    #[test]
    fn stiffness_is_the_energy_hessian() {
        let plate = PlateModel {
            mass: 1.0,
            i_pitch: 0.1,
            i_roll: 0.1,
            springs: vec![
                PlateSpring { x: 0.3, y: 0.1, k: 400.0 },
                PlateSpring { x: -0.2, y: 0.15, k: 250.0 },
                PlateSpring { x: 0.05, y: -0.2, k: 600.0 },
            ],
        };
        let (_, k) = assemble(&plate).unwrap();
        let energy = |q: [f64; 3]| {
            plate
                .springs
                .iter()
                .map(|s| {
                    let d = q[0] - s.x * q[1] + s.y * q[2];
                    0.5 * s.k * d * d
                })
                .sum::<f64>()
        };
        let h = 1e-3;
        for i in 0..3 {
            for j in 0..3 {
                let at = |di: f64, dj: f64| {
                    let mut q = [0.0; 3];
                    q[i] += di;
                    q[j] += dj;
                    energy(q)
                };
                let fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
                assert!((fd - k[(i, j)]).abs() < 1e-9 * k.abs().max().max(1.0) * 1e3, "{i}{j}");
            }
        }
    }

    #[test]
    fn uniform_plate_modes() {
        let (set, m, k) = plate_modes(&PlateModel::uniform(2.0, 0.25, 0.1, 400.0)).unwrap();
        let find = |l: ModeLabel| set.modes.iter().find(|x| x.label == l).unwrap().omega;
        let ratio = find(ModeLabel::Bound) / find(ModeLabel::Stott);
        assert!((ratio - 3f64.sqrt()).abs() < 1e-9);
        let mut labels: Vec<ModeLabel> = set.modes.iter().map(|x| x.label).collect();
        labels.sort_by_key(|l| *l as u8);
        assert_eq!(labels, vec![ModeLabel::Stott, ModeLabel::Bound, ModeLabel::Roll]);
        for mode in &set.modes {
            assert!(residual(&m, &k, mode) < 1e-9 * k.norm());
        }
    }

    #[test]
    fn free_plate_has_zero_frequencies() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.3, 0.1]));
        let set = normal_modes(&m, &DMatrix::zeros(3, 3)).unwrap();
        assert!(set.modes.iter().all(|x| x.omega == 0.0));
        for a in &set.modes {
            for b in &set.modes {
                let (va, vb) = (DVector::from_column_slice(&a.shape), DVector::from_column_slice(&b.shape));
                let g = va.dot(&(&m * vb));
                let want = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_indefinite_mass() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert_eq!(normal_modes(&m, &DMatrix::zeros(3, 3)), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn classification_by_dominant_coordinate() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.3, 0.1]));
        assert_eq!(classify_mode(&[1.0 / 2f64.sqrt(), 0.0, 0.0], &m).unwrap(), ModeLabel::Stott);
        assert_eq!(classify_mode(&[0.0, 1.0 / 0.3f64.sqrt(), 0.0], &m).unwrap(), ModeLabel::Bound);
        assert_eq!(classify_mode(&[0.0, 0.0, -3.0], &m).unwrap(), ModeLabel::Roll);
        assert_eq!(classify_mode(&[0.5, 1.0, 0.0], &m).unwrap(), ModeLabel::Mixed);
        assert!(classify_mode(&[0.0; 3], &m).is_err());
    }

    #[test]
    fn unforced_mode_stays_isolated() {
        let (set, ..) = plate_modes(&PlateModel::uniform(2.0, 0.25, 0.1, 400.0)).unwrap();
        let forcing = vec![vec![0.0; 3]; 2001];
        let r = modal_response(&set, &[0.0; 3], &forcing, &[(0.01, 0.0), (0.0, 0.0), (0.0, 0.0)], 1e-3).unwrap();
        assert!(r.coords[1].iter().chain(&r.coords[2]).all(|q| q.abs() < 1e-12));
        assert!(r.energy[0].last().unwrap() > &0.0);
    }

    fn random_plate() -> impl Strategy<Value = PlateModel> {
        (
            0.5..5.0f64,
            0.01..1.0f64,
            0.01..1.0f64,
            prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64, 10.0..2000.0f64), 3..6),
        )
            .prop_map(|(mass, i_pitch, i_roll, s)| PlateModel {
                mass,
                i_pitch,
                i_roll,
                springs: s.into_iter().map(|(x, y, k)| PlateSpring { x, y, k }).collect(),
            })
    }

    proptest! {
        #[test]
        fn modes_are_m_orthonormal_with_small_residuals(plate in random_plate()) {
            let (set, m, k) = plate_modes(&plate).unwrap();
            for w in set.modes.windows(2) {
                prop_assert!(w[0].omega <= w[1].omega);
            }
            for (i, a) in set.modes.iter().enumerate() {
                prop_assert!(residual(&m, &k, a) < 1e-9 * k.norm());
                for (j, b) in set.modes.iter().enumerate() {
                    let g = DVector::from_column_slice(&a.shape).dot(&(&m * DVector::from_column_slice(&b.shape)));
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g - want).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn scaling_stiffness_scales_frequencies(plate in random_plate(), c in 0.1..10.0f64) {
            let mut stiff = plate.clone();
            stiff.springs.iter_mut().for_each(|s| s.k *= c);
            let (a, ..) = plate_modes(&plate).unwrap();
            let (b, ..) = plate_modes(&stiff).unwrap();
            // Eigenvalue error is absolute, relative to the largest one.
            let top = b.modes.last().unwrap().omega.powi(2);
            for (x, y) in a.modes.iter().zip(&b.modes) {
                prop_assert!((y.omega.powi(2) - c * x.omega.powi(2)).abs() <= 1e-12 * top);
            }
        }

        #[test]
        fn labels_ignore_sign(plate in random_plate()) {
            let (set, m, _) = plate_modes(&plate).unwrap();
            for mode in &set.modes {
                let flipped: Vec<f64> = mode.shape.iter().map(|x| -x).collect();
                prop_assert_eq!(classify_mode(&flipped, &m).unwrap(), mode.label);
            }
        }
    }
}
