//! Byte-stable artifact serialization.
//!
//! Every float in every output file is printed with 17 significant digits
//! (`{:.16e}`), JSON object keys are sorted, and all rows are emitted in a
//! fixed order, so identical runs produce byte-identical files. Each
//! artifact embeds the SHA-256 of the configuration it came from.

use crate::continuum::ContinuumSolution;
use crate::convergence::ConvergenceReport;
use crate::discrete::DiscreteSolution;
use crate::geom::{BoxDomain, CVec3, RVec3};
use crate::placement::{Particle, ParticleCloud};
use crate::SolverDiagnostics;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed cloud JSON: {0}")]
    MalformedCloud(String),
}

/// 17-significant-digit scientific notation; fixed formatting is what makes
/// reruns byte-identical.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Sci17;

impl serde_json::ser::Formatter for Sci17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes a JSON value compactly with sorted keys and sci-17 floats,
/// ending in a newline.
pub fn json_bytes(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sci17);
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization cannot fail");
    out.push(b'\n');
    out
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let mut f = std::fs::File::create(path).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(bytes).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn vec3_json(v: &RVec3) -> Value {
    json!([v.x, v.y, v.z])
}

fn diagnostics_json(d: &SolverDiagnostics) -> Value {
    json!({
        "backend": d.backend,
        "residual": d.residual,
        "condition_estimate": d.condition_estimate,
        "iterations": d.iterations,
    })
}

/// Cloud export: {a, kappa, d, omega_box, particles: [{x, y, z, zeta_re,
/// zeta_im}]} plus the config hash.
pub fn cloud_json(cloud: &ParticleCloud, config_sha256: &str) -> Value {
    let particles: Vec<Value> = cloud
        .particles
        .iter()
        .map(|p| {
            json!({
                "x": p.position.x,
                "y": p.position.y,
                "z": p.position.z,
                "zeta_re": p.zeta.re,
                "zeta_im": p.zeta.im,
            })
        })
        .collect();
    json!({
        "a": cloud.radius,
        "kappa": cloud.kappa,
        "d": cloud.spacing,
        "omega_box": {
            "center": vec3_json(&cloud.domain.center),
            "edge": cloud.domain.edge,
        },
        "particles": particles,
        "config_sha256": config_sha256,
    })
}

/// Inverse of [`cloud_json`]; ignores the embedded hash.
pub fn cloud_from_json(value: &Value) -> Result<ParticleCloud, OutputError> {
    let bad = |msg: &str| OutputError::MalformedCloud(msg.to_string());
    let get_f64 = |v: &Value, key: &str| -> Result<f64, OutputError> {
        v.get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| bad(&format!("missing numeric field `{key}`")))
    };
    let radius = get_f64(value, "a")?;
    let kappa = get_f64(value, "kappa")?;
    let spacing = get_f64(value, "d")?;
    let omega_box = value
        .get("omega_box")
        .ok_or_else(|| bad("missing omega_box"))?;
    let edge = get_f64(omega_box, "edge")?;
    let center = omega_box
        .get("center")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 3)
        .ok_or_else(|| bad("omega_box.center must be a 3-array"))?;
    let c: Vec<f64> = center
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| bad("non-numeric center entry")))
        .collect::<Result<_, _>>()?;
    let domain = BoxDomain::new(RVec3::new(c[0], c[1], c[2]), edge);
    let raw = value
        .get("particles")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing particles array"))?;
    let mut particles = Vec::with_capacity(raw.len());
    for p in raw {
        particles.push(Particle {
            position: RVec3::new(get_f64(p, "x")?, get_f64(p, "y")?, get_f64(p, "z")?),
            zeta: Complex64::new(get_f64(p, "zeta_re")?, get_f64(p, "zeta_im")?),
        });
    }
    Ok(ParticleCloud {
        radius,
        kappa,
        spacing,
        domain,
        particles,
        non_passive: Vec::new(),
    })
}

/// Per-particle {x_m, P_m (6 reals), Q_m (6 reals)} plus diagnostics.
pub fn solution_json(sol: &DiscreteSolution, config_sha256: &str) -> Value {
    let particles: Vec<Value> = sol
        .positions()
        .iter()
        .zip(sol.moments.iter().zip(&sol.charges))
        .map(|(x, (p, q))| {
            json!({
                "x": vec3_json(x),
                "p_re": [p.x.re, p.y.re, p.z.re],
                "p_im": [p.x.im, p.y.im, p.z.im],
                "q_re": [q.x.re, q.y.re, q.z.re],
                "q_im": [q.x.im, q.y.im, q.z.im],
            })
        })
        .collect();
    json!({
        "diagnostics": diagnostics_json(&sol.diagnostics),
        "particles": particles,
        "config_sha256": config_sha256,
    })
}

/// Placeholder solution file for an empty cloud (nothing to solve).
pub fn empty_solution_json(config_sha256: &str) -> Value {
    json!({
        "diagnostics": Value::Null,
        "particles": [],
        "config_sha256": config_sha256,
    })
}

/// Field samples as CSV rows x,y,z,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez.
pub fn field_csv(points: &[RVec3], values: &[CVec3], config_sha256: &str) -> String {
    assert_eq!(points.len(), values.len());
    let mut out = String::new();
    out.push_str(&format!("# config_sha256={config_sha256}\n"));
    out.push_str("x,y,z,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez\n");
    for (x, e) in points.iter().zip(values) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(x.x),
            fmt_f64(x.y),
            fmt_f64(x.z),
            fmt_f64(e.x.re),
            fmt_f64(e.x.im),
            fmt_f64(e.y.re),
            fmt_f64(e.y.im),
            fmt_f64(e.z.re),
            fmt_f64(e.z.im),
        ));
    }
    out
}

/// Nodal curl values of the collocation solution.
pub fn nodal_json(sol: &ContinuumSolution, config_sha256: &str) -> Value {
    let nodes: Vec<Value> = sol
        .grid
        .centers
        .iter()
        .zip(sol.grid.weights.iter().zip(&sol.curls))
        .map(|(y, (w, curl))| {
            json!({
                "x": vec3_json(y),
                "weight_re": w.re,
                "weight_im": w.im,
                "w_re": [curl.x.re, curl.y.re, curl.z.re],
                "w_im": [curl.x.im, curl.y.im, curl.z.im],
            })
        })
        .collect();
    json!({
        "n": sol.grid.n,
        "cell": sol.grid.cell,
        "domain": {
            "center": vec3_json(&sol.grid.domain.center),
            "edge": sol.grid.domain.edge,
        },
        "diagnostics": diagnostics_json(&sol.diagnostics),
        "nodes": nodes,
        "config_sha256": config_sha256,
    })
}

/// Refinement table as CSV: a,d,m,eps_l2 (skipped steps carry an empty
/// eps_l2 and the reason). Wall-clock times are deliberately left out so
/// reruns are byte-identical.
pub fn report_csv(report: &ConvergenceReport, config_sha256: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_sha256={config_sha256}\n"));
    out.push_str("a,d,m,eps_l2,skipped\n");
    for step in &report.steps {
        let eps = step.eps_l2.map(fmt_f64).unwrap_or_default();
        let reason = step.skipped.clone().unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(step.radius),
            fmt_f64(step.spacing),
            step.count,
            eps,
            reason,
        ));
    }
    out
}

pub fn report_json(report: &ConvergenceReport, config_sha256: &str) -> Value {
    let steps: Vec<Value> = report
        .steps
        .iter()
        .map(|s| {
            json!({
                "a": s.radius,
                "d": s.spacing,
                "m": s.count,
                "eps_l2": s.eps_l2,
                "skipped": s.skipped,
            })
        })
        .collect();
    json!({
        "grid_n": report.grid_n,
        "shell_points": report.shell_points,
        "steps": steps,
        "config_sha256": config_sha256,
    })
}

/// Designed h·N samples as CSV rows x,y,z,re,im.
pub fn hn_csv(points: &[RVec3], values: &[Complex64], config_sha256: &str) -> String {
    assert_eq!(points.len(), values.len());
    let mut out = String::new();
    out.push_str(&format!("# config_sha256={config_sha256}\n"));
    out.push_str("x,y,z,re,im\n");
    for (x, v) in points.iter().zip(values) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(x.x),
            fmt_f64(x.y),
            fmt_f64(x.z),
            fmt_f64(v.re),
            fmt_f64(v.im),
        ));
    }
    out
}

/// The canonical (h, N) split of a designed product, point by point.
pub fn split_json(
    domain: &BoxDomain,
    grid_n: usize,
    points: &[RVec3],
    h: &[Complex64],
    n: &[f64],
    passivity_violations: usize,
    config_sha256: &str,
) -> Value {
    let rows: Vec<Value> = points
        .iter()
        .zip(h.iter().zip(n))
        .map(|(x, (hv, nv))| {
            json!({
                "x": vec3_json(x),
                "h_re": hv.re,
                "h_im": hv.im,
                "N": nv,
            })
        })
        .collect();
    json!({
        "split": "N = 1 on the support of h*N, h = h*N",
        "domain": {"center": vec3_json(&domain.center), "edge": domain.edge},
        "grid_n": grid_n,
        "passivity_violations": passivity_violations,
        "points": rows,
        "config_sha256": config_sha256,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_has_17_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(-0.125), "-1.2500000000000000e-1");
        assert_eq!(fmt_f64(3.0_f64.sqrt()), "1.7320508075688772e0");
    }

    #[test]
    fn json_floats_use_sci17_and_sorted_keys() {
        let v = json!({"zeta": 0.5, "alpha": 2.0, "count": 3});
        let s = String::from_utf8(json_bytes(&v)).unwrap();
        assert_eq!(
            s,
            "{\"alpha\":2.0000000000000000e0,\"count\":3,\"zeta\":5.0000000000000000e-1}\n"
        );
    }

    #[test]
    fn cloud_round_trips_through_json() {
        let cloud = ParticleCloud::from_parts(
            0.05,
            0.5,
            BoxDomain::unit(),
            vec![RVec3::new(0.1, -0.2, 0.3), RVec3::new(-0.3, 0.0, 0.25)],
            vec![Complex64::new(1.5, -0.5), Complex64::new(0.0, 2.0)],
        );
        let v = cloud_json(&cloud, "deadbeef");
        let back = cloud_from_json(&v).unwrap();
        assert_eq!(back.radius, cloud.radius);
        assert_eq!(back.kappa, cloud.kappa);
        assert_eq!(back.particles.len(), 2);
        for (a, b) in back.particles.iter().zip(&cloud.particles) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.zeta, b.zeta);
        }
        // Serialization itself is stable byte for byte.
        assert_eq!(json_bytes(&v), json_bytes(&cloud_json(&cloud, "deadbeef")));
    }

    #[test]
    fn malformed_cloud_rejected() {
        let v = json!({"a": 0.1});
        assert!(cloud_from_json(&v).is_err());
    }

    #[test]
    fn field_csv_layout() {
        let pts = vec![RVec3::new(1.0, 0.0, 0.0)];
        let vals = vec![CVec3::new(
            Complex64::new(0.5, -0.5),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.25),
        )];
        let csv = field_csv(&pts, &vals, "abc");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config_sha256=abc");
        assert_eq!(lines[1], "x,y,z,re_ex,im_ex,re_ey,im_ey,re_ez,im_ez");
        assert!(lines[2].starts_with("1.0000000000000000e0,"));
        assert_eq!(lines.len(), 3);
    }
}
