//! Instance files: one JSON document with a readable header and base64
//! payloads of little-endian `f64` values (interleaved re/im).
//!
//! ```text
//! {
//!   "format": "phasesync-instance",
//!   "version": 1,
//!   "n": .., "sigma": .., "seed": .., "mode": "random-phases" | "all-ones",
//!   "z_star":  base64, n complex entries
//!   "w_upper": base64, strict upper triangle of W, row-major, n(n-1)/2 entries
//!   "c_upper": base64, upper triangle of C incl. diagonal, row-major, n(n+1)/2 entries
//!   "checksum": "sha256:<hex>" over the decoded bytes z_star ‖ w_upper ‖ c_upper
//! }
//! ```
//!
//! Lower triangles are implied by Hermitian symmetry and the diagonal of `W`
//! is zero, so nothing is lost.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{assemble, Instance, TruthMode};
use crate::error::{Error, Result};
use crate::matrix::HermitianMatrix;
use crate::phase::PhaseVector;
use crate::scalar::Cx;

pub const INSTANCE_FORMAT: &str = "phasesync-instance";
pub const INSTANCE_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    format: String,
    version: u64,
    n: usize,
    sigma: f64,
    seed: u64,
    mode: TruthMode,
    z_star: String,
    w_upper: String,
    c_upper: String,
    checksum: String,
}

fn encode(values: impl Iterator<Item = Cx<f64>>) -> Vec<u8> {
    let mut out = Vec::new();
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], expected: usize, what: &str) -> Result<Vec<Cx<f64>>> {
    if bytes.len() != expected * 16 {
        return Err(Error::Malformed(format!(
            "{what}: expected {} bytes, found {}",
            expected * 16,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex::new(re, im)
        })
        .collect())
}

fn checksum(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let digest = h.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// Serializes the instance to a JSON string (deterministic for equal instances).
pub fn instance_to_json(inst: &Instance<f64>) -> Result<String> {
    let n = inst.n;
    let z = encode(inst.z_star.as_slice().iter().copied());
    let w = encode(
        (0..n)
            .flat_map(|j| ((j + 1)..n).map(move |l| (j, l)))
            .map(|(j, l)| inst.w[(j, l)]),
    );
    let c = encode(
        (0..n)
            .flat_map(|j| (j..n).map(move |l| (j, l)))
            .map(|(j, l)| inst.c[(j, l)]),
    );
    let doc = InstanceDoc {
        format: INSTANCE_FORMAT.to_string(),
        version: INSTANCE_FORMAT_VERSION,
        n,
        sigma: inst.sigma,
        seed: inst.seed,
        mode: inst.mode,
        checksum: checksum(&[&z, &w, &c]),
        z_star: B64.encode(&z),
        w_upper: B64.encode(&w),
        c_upper: B64.encode(&c),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn instance_from_json(text: &str) -> Result<Instance<f64>> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Malformed(format!("not a JSON document: {e}")))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(INSTANCE_FORMAT) => {}
        other => return Err(Error::Malformed(format!("unexpected format tag {other:?}"))),
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Malformed("missing version".into()))?;
    if version != INSTANCE_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let doc: InstanceDoc =
        serde_json::from_value(value).map_err(|e| Error::Malformed(e.to_string()))?;
    let n = doc.n;
    if n == 0 {
        return Err(Error::Malformed("n = 0".into()));
    }
    let raw = |s: &str, what: &str| {
        B64.decode(s)
            .map_err(|e| Error::Malformed(format!("{what}: bad base64: {e}")))
    };
    let z_raw = raw(&doc.z_star, "z_star")?;
    let w_raw = raw(&doc.w_upper, "w_upper")?;
    let c_raw = raw(&doc.c_upper, "c_upper")?;
    let computed = checksum(&[&z_raw, &w_raw, &c_raw]);
    if computed != doc.checksum {
        return Err(Error::ChecksumMismatch {
            stored: doc.checksum,
            computed,
        });
    }
    let z = decode(&z_raw, n, "z_star")?;
    let w_up = decode(&w_raw, n * (n - 1) / 2, "w_upper")?;
    let c_up = decode(&c_raw, n * (n + 1) / 2, "c_upper")?;

    let z_star = PhaseVector::new(z).map_err(|e| Error::Malformed(format!("z_star: {e}")))?;
    let mut w_full = vec![Complex::new(0.0, 0.0); n * n];
    let mut c_full = vec![Complex::new(0.0, 0.0); n * n];
    let (mut wi, mut ci) = (w_up.into_iter(), c_up.into_iter());
    for j in 0..n {
        for l in j..n {
            c_full[j * n + l] = ci.next().expect("counted");
            if l > j {
                w_full[j * n + l] = wi.next().expect("counted");
            }
        }
    }
    let w = HermitianMatrix::from_upper(n, |j, l| w_full[j * n + l]);
    let c = HermitianMatrix::from_upper(n, |j, l| c_full[j * n + l]);
    if !(doc.sigma >= 0.0) {
        return Err(Error::Malformed(format!("sigma = {}", doc.sigma)));
    }
    let expect = assemble(&z_star, doc.sigma, &w);
    if expect
        .add_scaled(-1.0, &c)?
        .as_slice()
        .iter()
        .any(|d| d.norm() > 1e-12)
    {
        return Err(Error::Malformed("C differs from z*(z*)^H + σW".into()));
    }
    Ok(Instance {
        n,
        sigma: doc.sigma,
        seed: doc.seed,
        mode: doc.mode,
        z_star,
        w,
        c,
    })
}

pub fn save_instance(inst: &Instance<f64>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, instance_to_json(inst)?)?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance<f64>> {
    let text = fs::read_to_string(path)?;
    instance_from_json(&text)
}
