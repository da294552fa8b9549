//! Structured TOML reports and CSV artifacts.

use std::collections::BTreeMap;

use num_complex::Complex64;
use scalecalc_core::delay::{RegimeResidual, ResidualReport};
use scalecalc_core::sampled::SampledFunction;
use scalecalc_core::scale::EpsilonSchedule;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Input {
    pub name: String,
    pub sha256: String,
}

impl Input {
    pub fn new(name: &str, bytes: &[u8]) -> Self {
        Input { name: name.to_string(), sha256: hex::encode(Sha256::digest(bytes)) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub inputs: Vec<Input>,
    /// Every resolved setting, flags and file values alike.
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleEcho {
    pub eps0: f64,
    pub ratio: f64,
    pub levels: usize,
    pub grid_step: f64,
    pub epsilons: Vec<f64>,
    pub level_steps: Vec<usize>,
}

impl From<&EpsilonSchedule> for ScheduleEcho {
    fn from(s: &EpsilonSchedule) -> Self {
        ScheduleEcho {
            eps0: s.eps0(),
            ratio: s.ratio(),
            levels: s.levels(),
            grid_step: s.grid_step(),
            epsilons: s.epsilons(),
            level_steps: s.level_steps().to_vec(),
        }
    }
}

/// One sampled field with its interval, norms and inline CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Field {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared: Option<[f64; 2]>,
    /// Interval actually evaluated (empty when nothing could be).
    pub effective: Vec<f64>,
    pub sup: f64,
    pub l2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged_fraction: Option<f64>,
    pub csv: String,
}

impl Field {
    pub fn sampled(name: &str, s: &SampledFunction, sup: f64, l2: f64) -> Self {
        Field {
            name: name.to_string(),
            declared: None,
            effective: vec![s.start(), s.end()],
            sup,
            l2,
            converged_fraction: None,
            csv: s.to_csv(),
        }
    }

    pub fn regime(name: &str, r: &RegimeResidual) -> Self {
        let frac = r.converged.as_ref().map(|f| f.iter().filter(|&&c| c).count() as f64 / f.len().max(1) as f64);
        Field {
            name: name.to_string(),
            declared: Some([r.declared.0, r.declared.1]),
            effective: r.effective.map(|(a, b)| vec![a, b]).unwrap_or_default(),
            sup: r.sup,
            l2: r.l2,
            converged_fraction: frac,
            csv: r.residual.as_ref().map(residual_csv(r)).unwrap_or_default(),
        }
    }

    pub fn residual_pair(name: &str, r: &ResidualReport) -> [Field; 2] {
        [Field::regime(&format!("{name}.regime1"), &r.regimes[0]), Field::regime(&format!("{name}.regime2"), &r.regimes[1])]
    }
}

/// Residual CSV with an `in_norm` column appended.
fn residual_csv(r: &RegimeResidual) -> impl Fn(&SampledFunction) -> String + '_ {
    move |s| {
        let mut out = String::new();
        for (i, line) in s.to_csv().lines().enumerate() {
            out.push_str(line);
            match i {
                0 => out.push_str(",in_norm"),
                _ => out.push_str(if r.in_norm[i - 1] { ",1" } else { ",0" }),
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub subcommand: String,
    pub status: Status,
    pub tolerance: f64,
    /// The quantity compared against `tolerance`.
    pub measured: f64,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleEcho>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
    pub fields: Vec<Field>,
}

impl Report {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("reports serialize")
    }

    /// The CSV artifacts: one per field, each preceded by `#` lines carrying
    /// the effective interval and the ε-schedule.
    pub fn csv_artifacts(&self) -> Vec<(String, String)> {
        let schedule = self.schedule.as_ref().map(|s| {
            format!("# schedule: eps0={:e} ratio={} levels={} epsilons={:?}\n", s.eps0, s.ratio, s.levels, s.epsilons)
        });
        self.fields
            .iter()
            .map(|f| {
                let mut text = format!("# field: {}\n# effective: {:?}\n", f.name, f.effective);
                if let Some(s) = &schedule {
                    text.push_str(s);
                }
                text.push_str(&f.csv);
                (f.name.clone(), text)
            })
            .collect()
    }
}

pub fn complex_metrics(metrics: &mut BTreeMap<String, f64>, name: &str, values: &[Complex64]) {
    for (c, v) in values.iter().enumerate() {
        metrics.insert(format!("{name}.re_{c}"), v.re);
        metrics.insert(format!("{name}.im_{c}"), v.im);
    }
}
