//! Run configuration: one JSON document with a section per pipeline stage.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::{EvalOptions, EvalPlan};
use crate::lst::LstConfig;
use crate::preprocess::{FilterBankSpec, PreprocessConfig};
use crate::synth::SynthConfig;

/// Output file names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct IoConfig {
    pub dataset_extension: String,
    pub model_file: String,
    pub report_csv: String,
    pub summary_json: String,
    pub residual_csv: String,
    pub resolved_config: String,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            dataset_extension: "epochs".into(),
            model_file: "model.trca".into(),
            report_csv: "report.csv".into(),
            summary_json: "summary.json".into(),
            residual_csv: "residuals.csv".into(),
            resolved_config: "resolved-config.json".into(),
        }
    }
}

impl IoConfig {
    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, v) in [
            ("datasetExtension", &self.dataset_extension),
            ("modelFile", &self.model_file),
            ("reportCsv", &self.report_csv),
            ("summaryJson", &self.summary_json),
            ("residualCsv", &self.residual_csv),
            ("resolvedConfig", &self.resolved_config),
        ] {
            if v.is_empty() || v.contains('/') || v.contains('\\') {
                out.push(format!("io.{k} must be a plain file name, got {v:?}"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, replaces `synth.rngSeed` and seeds `eval.rngSeed` from it.
    pub seed: Option<u64>,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub filterbank: FilterBankSpec,
    pub lst: LstConfig,
    pub eval: EvalPlan,
    pub io: IoConfig,
}

impl Default for RunConfig {
    /// The desk benchmark: six trials per stimulus leave room for two test
    /// trials and up to four calibration trials.
    fn default() -> Self {
        RunConfig {
            seed: None,
            synth: SynthConfig::default(),
            preprocess: PreprocessConfig::default(),
            filterbank: FilterBankSpec::default(),
            lst: LstConfig::default(),
            eval: EvalPlan {
                calib_trial_counts: vec![2, 3, 4],
                test_trials_per_stimulus: 2,
                ..EvalPlan::default()
            },
            io: IoConfig::default(),
        }
    }
}

const EVAL_SEED_SALT: u64 = 0x5eed_0000_e7a1;

/// Removes keys of `given` absent from `reference`, recording each one.
fn strip_unknown(given: &mut Value, reference: &Value, path: &str, out: &mut Vec<String>) {
    let (Value::Object(g), Value::Object(r)) = (given, reference) else {
        return;
    };
    g.retain(|k, _| {
        let known = r.contains_key(k);
        if !known {
            out.push(if path.is_empty() {
                format!("unknown key {k}")
            } else {
                format!("unknown key {path}.{k}")
            });
        }
        known
    });
    for (k, v) in g.iter_mut() {
        let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        let rv = &r[k];
        if let (Value::Array(items), Value::Array(ref_items)) = (&mut *v, rv) {
            if let Some(first) = ref_items.first() {
                for (i, item) in items.iter_mut().enumerate() {
                    strip_unknown(item, first, &format!("{here}[{i}]"), out);
                }
            }
        } else {
            strip_unknown(v, rv, &here, out);
        }
    }
}

/// Overlays `given` onto `base`, object by object; anything else replaces.
fn merge(base: &mut Value, given: Value) {
    match (base, given) {
        (Value::Object(b), Value::Object(g)) => {
            for (k, v) in g {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Parses and validates a config document, reporting every unknown key
    /// and every invalid value together.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut given: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("malformed JSON: {e}")]))?;
        let reference = serde_json::to_value(RunConfig::default())?;
        let mut problems = Vec::new();
        strip_unknown(&mut given, &reference, "", &mut problems);
        // keys left out take the run defaults, not each section's own defaults
        let mut full = reference;
        merge(&mut full, given);
        match serde_json::from_value::<RunConfig>(full) {
            Ok(cfg) => {
                let cfg = cfg.resolved();
                problems.extend(cfg.problems());
                if problems.is_empty() {
                    return Ok(cfg);
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
        Err(Error::Config(problems))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }

    /// Applies the top-level seed to the per-stage seeds.
    pub fn resolved(mut self) -> Self {
        if let Some(s) = self.seed {
            self.synth.rng_seed = s;
            self.eval.rng_seed = s ^ EVAL_SEED_SALT;
        }
        self
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        out.extend(self.synth.problems());
        out.extend(self.preprocess.problems().into_iter().map(|p| format!("preprocess: {p}")));
        out.extend(
            self.filterbank
                .problems(self.synth.sample_rate_hz)
                .into_iter()
                .map(|p| format!("filterbank: {p}")),
        );
        out.extend(self.eval.problems());
        out.extend(self.io.problems());
        out
    }

    pub fn validated(self) -> Result<Self> {
        let p = self.problems();
        if p.is_empty() {
            Ok(self)
        } else {
            Err(Error::Config(p))
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            filter_bank: self.filterbank.clone(),
            padding_seconds: self.preprocess.padding_seconds,
            lst: self.lst.clone(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Every config key with its default value, one `section.key = value`
    /// line each.
    pub fn documented_defaults() -> String {
        fn walk(v: &Value, path: &str, out: &mut String) {
            match v {
                Value::Object(m) if !m.is_empty() && !path.ends_with(']') => {
                    for (k, x) in m {
                        let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                        walk(x, &p, out);
                    }
                }
                _ => out.push_str(&format!("  {path} = {v}\n")),
            }
        }
        let mut out = String::new();
        walk(&serde_json::to_value(RunConfig::default()).expect("serializes"), "", &mut out);
        out
    }
}
