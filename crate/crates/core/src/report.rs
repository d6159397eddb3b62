//! End-to-end analysis of a mesh and the JSON report it produces.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{assemble_derived, identity_suite, sign_table, Calculus, DerivedOperators, IdentityReport, Resolved, SignEntry};
use crate::cylinder::disk_dtn_mode;
use crate::dense::RankPolicy;
use crate::dtn::{assemble_dtn, DtnOperators};
use crate::error::{Error, Result};
use crate::exact::{simplicial_oracle, Betti};
use crate::galerkin::{assemble_galerkin, GalerkinStructures};
use crate::generators::MeshData;
use crate::mesh::{extract_boundary, BoundaryComplex, SimplicialComplex};
use crate::topology::{topology_report, TopologyReport};

pub const SCHEMA: u32 = 1;

/// Boundary Hodge-Laplacian eigenvalue cut for the resolved residuals.
pub const DEFAULT_RESOLVED_CUT: f64 = 40.0;

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub identities: bool,
    /// Inclusive degree range kept in the identity list.
    pub degrees: Option<(usize, usize)>,
    pub policy: RankPolicy,
    pub timings: bool,
    pub resolved_cut: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            identities: true,
            degrees: None,
            policy: RankPolicy::default(),
            timings: true,
            resolved_cut: DEFAULT_RESOLVED_CUT,
        }
    }
}

/// Everything assembled for one mesh.
pub struct Pipeline {
    pub complex: SimplicialComplex,
    pub boundary: BoundaryComplex,
    pub galerkin: GalerkinStructures,
    pub dtn: DtnOperators,
    pub calculus: Calculus,
    pub timings: BTreeMap<String, f64>,
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f()?;
    timings.insert(stage.to_string(), t.elapsed().as_secs_f64());
    Ok(out)
}

impl Pipeline {
    pub fn build(data: &MeshData, policy: RankPolicy) -> Result<Self> {
        let mut timings = BTreeMap::new();
        let complex = timed(&mut timings, "complex", || data.build())?;
        let boundary = timed(&mut timings, "boundary", || extract_boundary(&complex))?;
        let galerkin = timed(&mut timings, "galerkin", || assemble_galerkin(&complex, &boundary))?;
        let dtn = timed(&mut timings, "dtn", || assemble_dtn(&complex, &boundary, &galerkin))?;
        let calculus = Calculus::new(&galerkin, &dtn, policy);
        Ok(Self {
            complex,
            boundary,
            galerkin,
            dtn,
            calculus,
            timings,
        })
    }

    pub fn derived(&mut self) -> Result<DerivedOperators> {
        let cx = &self.calculus;
        timed(&mut self.timings, "derived", || assemble_derived(cx))
    }

    pub fn h(&self) -> f64 {
        self.complex.max_edge_length()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshInfo {
    pub name: String,
    pub n: usize,
    pub counts: Vec<usize>,
    pub boundary_counts: Vec<usize>,
    pub boundary_components: usize,
    pub h: f64,
}

/// Generalized eigenvalues of Φ_0 against the boundary mass, compared with
/// the unit-disk values `|m|` (eigenvalues pair up as cos/sin).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtnSpectrum {
    pub eigenvalues: Vec<f64>,
    /// `(m, paired eigenvalues, worst relative error)` for the unit disk.
    pub disk_modes: Vec<(usize, [f64; 2], f64)>,
}

pub fn phi0_spectrum(cx: &Calculus, count: usize) -> Vec<f64> {
    let l = &cx.metrics[0].l_inv;
    let s = l * &cx.phi[0] * l.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.truncate(count);
    ev
}

pub fn disk_comparison(cx: &Calculus, m_max: usize) -> DtnSpectrum {
    let eigenvalues = phi0_spectrum(cx, 2 * m_max + 1);
    let disk_modes = (1..=m_max)
        .filter(|&m| 2 * m < eigenvalues.len())
        .map(|m| {
            let pair = [eigenvalues[2 * m - 1], eigenvalues[2 * m]];
            let exact = disk_dtn_mode(m as i64);
            let err = pair.iter().map(|v| (v - exact).abs() / exact).fold(0.0, f64::max);
            (m, pair, err)
        })
        .collect();
    DtnSpectrum {
        eigenvalues,
        disk_modes,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oracles {
    pub betti: Betti,
    pub betti_matches: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disk_dtn: Option<DtnSpectrum>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub version: String,
    pub mesh: MeshInfo,
    pub topology: TopologyReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub identities: Vec<IdentityReport>,
    pub resolved_cut: f64,
    pub oracles: Oracles,
    pub sign_table: Vec<SignEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        let s = serde_json::to_string_pretty(self)?;
        // Non-finite floats serialise as null; nothing else does.
        let v: serde_json::Value = serde_json::from_str(&s)?;
        if let Some(path) = find_null(&v, String::new()) {
            return Err(Error::NonFinite(path));
        }
        Ok(s)
    }
}

fn find_null(v: &serde_json::Value, path: String) -> Option<String> {
    match v {
        serde_json::Value::Null => Some(path),
        serde_json::Value::Array(a) => a.iter().enumerate().find_map(|(i, x)| find_null(x, format!("{path}[{i}]"))),
        serde_json::Value::Object(o) => o.iter().find_map(|(k, x)| find_null(x, format!("{path}.{k}"))),
        _ => None,
    }
}

pub fn analyze(name: &str, data: &MeshData, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let mut p = Pipeline::build(data, opts.policy)?;
    let derived = p.derived()?;
    let betti = simplicial_oracle(&p.complex, &p.boundary);
    let h = p.h();
    let cx = &p.calculus;
    let mut timings = p.timings.clone();
    let topology = timed(&mut timings, "topology", || Ok(topology_report(cx, &derived, &betti)))?;
    let identities = if opts.identities {
        let mut ids = timed(&mut timings, "identities", || {
            let res = Resolved::new(cx, opts.resolved_cut);
            identity_suite(cx, &derived, &res, h)
        })?;
        if let Some((lo, hi)) = opts.degrees {
            ids.retain(|r| (lo..=hi).contains(&r.degree));
        }
        ids
    } else {
        Vec::new()
    };
    let disk_dtn = (name.starts_with("disk2d") && p.complex.dim() == 2).then(|| disk_comparison(cx, 5));
    let oracles = Oracles {
        betti_matches: topology.betti_matches(),
        betti,
        disk_dtn,
    };
    let m = p.boundary.dim();
    Ok(AnalysisReport {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION").to_string(),
        mesh: MeshInfo {
            name: name.to_string(),
            n: p.complex.dim(),
            counts: p.complex.counts(),
            boundary_counts: (0..=m).map(|k| p.boundary.count(k)).collect(),
            boundary_components: p.boundary.components(),
            h,
        },
        topology,
        identities,
        resolved_cut: opts.resolved_cut,
        oracles,
        sign_table: sign_table(),
        timings: opts.timings.then_some(timings),
    })
}

/// Matrix behind an export label: `Phi<k>`, `Psi<k>`, `Lambda<k>`, `G<k>`,
/// `Theta<k>`, `PsiTilde<k>`, `D<k>` (boundary d), `M<k>` (boundary mass),
/// `W<k>` (strong to weak).
pub fn export_matrix(p: &mut Pipeline, label: &str) -> Result<DMatrix<f64>> {
    let unknown = || Error::UnknownOperator(label.to_string());
    let split = label.find(|c: char| c.is_ascii_digit()).ok_or_else(unknown)?;
    let (kind, num) = label.split_at(split);
    let k: usize = num.parse().map_err(|_| unknown())?;
    let m = p.calculus.m;
    let cx = &p.calculus;
    let pick = |v: &[DMatrix<f64>], k: usize| v.get(k).cloned().ok_or_else(unknown);
    match kind {
        "Phi" => pick(&cx.phi, k),
        "Psi" if k >= 1 => pick(&cx.psi, k),
        "D" if k < m => pick(&cx.bd, k),
        "M" => pick(&cx.bmass, k),
        "W" if k <= m => Ok(cx.to_weak(k).matrix),
        "Lambda" | "G" | "Theta" | "PsiTilde" => {
            let d = p.derived()?;
            let ops = match kind {
                "Lambda" => &d.lambda,
                "G" => &d.g,
                "Theta" => &d.theta_strong,
                _ => &d.psi_tilde,
            };
            ops.get(k).map(|o| o.matrix.clone()).ok_or_else(unknown)
        }
        _ => Err(unknown()),
    }
}
