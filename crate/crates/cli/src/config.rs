//! Experiment configuration: command-line flags layered over an optional
//! TOML file, with `MODSUM_SEED` as the last seed fallback.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use modsum_core::channel::{AdversaryModel, Behavior, PartyId};
use modsum_core::field::{Field, FieldVector};
use modsum_core::quantum::{NoiseModel, QuantumRegister};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Output options that a config file may carry.
#[derive(Clone, Debug, Default)]
pub struct FileOptions {
    pub format: Option<Format>,
    pub output: Option<std::path::PathBuf>,
    pub jobs: Option<usize>,
}

/// Every tunable of every subcommand. Unset fields fall back to the config
/// file, then to per-command defaults.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Params {
    /// Protocol, attack or verification target
    #[arg(long, alias = "protocol")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Field order q (prime power); alternatively --p and --ell
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    /// Symbols per share, or extension degree for cheater detection
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    /// MAC tag length
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<usize>,
    /// Project length
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Number of parties
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Copies per verification group
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Player under test (1-based)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// none | depolarizing:EPS | dephasing:EPS | replacement:DELTA
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
    /// ghz | product | bell | classical
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// ideal | literal
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signs: Option<String>,
    /// Bell test: use the sqrt(2) - c1/sqrt(n) CHSH threshold
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub literal_bell: Option<bool>,
    /// ideal | ring | quantum | from-summation
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// Party inputs, e.g. "1,0;0,1;1,1"
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<String>,
    /// Invertible map for the homomorphic protocol, rows e.g. "0,1;1,0"
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    /// semi-honest | modification | rushing | mismatched-recognition
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub behavior: Option<String>,
    /// Corrupted parties, e.g. "2,3"
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupted: Option<String>,
    /// Colluding parties for audits
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colluders: Option<String>,
    /// ideal | copied-share
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle: Option<String>,
    /// Parties that disapprove in authentication runs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disapprove: Option<String>,
    /// Parties that recognize a different project
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<String>,
    /// Modification offset (packed extension element)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<u32>,
    /// First colluding party of the collusion attack
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    /// Attack the secure authentication variant
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secure: Option<bool>,
    /// exact | mc
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Monte-Carlo trials
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// Independent repetitions of a protocol run
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeat: Option<u64>,
    /// Sweep: subcommand to repeat (run-protocol | verify | attack | audit)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    /// Sweep: parameter to vary
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
    /// Sweep: comma-separated values
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

macro_rules! layer {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Params {
    /// Fills unset fields from `base`.
    pub fn over(mut self, base: &Params) -> Params {
        layer!(self, base; name, q, p, ell, c, e, d, m, n, j, c1, alpha, noise, source, signs, literal_bell,
               generator, inputs, map, behavior, corrupted, colluders, bundle, disapprove, mismatch, offset, l,
               secure, mode, trials, repeat, experiment, param, values, seed);
        self
    }

    /// Reads a TOML config. Besides the parameters it may set `format`,
    /// `output` and `jobs`; any other key is an error.
    pub fn load(path: &Path) -> Result<(Params, FileOptions)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let mut options = FileOptions::default();
        if let Some(v) = table.remove("format") {
            options.format = Some(v.try_into().context("config key format")?);
        }
        if let Some(v) = table.remove("output") {
            options.output = Some(v.try_into().context("config key output")?);
        }
        if let Some(v) = table.remove("jobs") {
            options.jobs = Some(v.try_into().context("config key jobs")?);
        }
        let params = toml::Value::Table(table).try_into().with_context(|| format!("validating {}", path.display()))?;
        Ok((params, options))
    }

    /// Seed from flags or config, else `MODSUM_SEED`, else 0.
    pub fn resolve_seed(&mut self) -> Result<()> {
        if self.seed.is_none() {
            self.seed = Some(match std::env::var("MODSUM_SEED") {
                Ok(s) => s.trim().parse().with_context(|| format!("MODSUM_SEED={s} is not an integer"))?,
                Err(_) => 0,
            });
        }
        Ok(())
    }

    /// Copy with one field replaced, by its kebab-case name.
    pub fn with_value(&self, key: &str, value: &str) -> Result<Params> {
        if serde_json::from_value::<Params>(serde_json::json!({ key: null })).is_err() {
            bail!("unknown parameter {key}");
        }
        let set = |val: serde_json::Value| -> Result<Params> {
            let mut v = serde_json::to_value(self)?;
            v.as_object_mut().expect("params serialize to an object").insert(key.to_string(), val);
            Ok(serde_json::from_value(v)?)
        };
        if let Ok(n @ (serde_json::Value::Number(_) | serde_json::Value::Bool(_))) = serde_json::from_str(value) {
            if let Ok(p) = set(n) {
                return Ok(p);
            }
        }
        set(serde_json::Value::String(value.to_string())).with_context(|| format!("cannot set {key} = {value}"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn field(&self) -> Result<Field> {
        let q = match (self.q, self.p, self.ell) {
            (Some(q), None, None) => q,
            (None, Some(p), ell) => p.checked_pow(ell.unwrap_or(1) as u32).ok_or_else(|| anyhow!("p^ell overflows"))?,
            (None, None, _) => 2,
            _ => bail!("give either --q or --p/--ell, not both"),
        };
        Ok(Field::of_order(q)?)
    }

    pub fn m(&self) -> usize {
        self.m.unwrap_or(3)
    }

    pub fn c(&self) -> usize {
        self.c.unwrap_or(1)
    }

    pub fn noise(&self, field: &Field, m: usize) -> Result<NoiseModel> {
        let spec = self.noise.as_deref().unwrap_or("none");
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let eps = || -> Result<f64> { arg.parse().with_context(|| format!("noise {spec} needs a numeric parameter")) };
        let model = match kind {
            "none" => NoiseModel::None,
            "depolarizing" => NoiseModel::Depolarizing(eps()?),
            "dephasing" => NoiseModel::Dephasing(eps()?),
            "replacement" => NoiseModel::Replacement {
                state: Box::new(QuantumRegister::basis_state(field, &vec![0; m])?),
                prob: eps()?,
            },
            _ => bail!("unknown noise model {spec}"),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn adversary(&self, default: Behavior) -> Result<AdversaryModel> {
        let corrupted = parties(self.corrupted.as_deref())?;
        if corrupted.is_empty() {
            return Ok(AdversaryModel::honest());
        }
        let behavior = match self.behavior.as_deref() {
            None => default,
            Some("semi-honest") => Behavior::SemiHonest,
            Some("modification") => Behavior::Modification,
            Some("rushing") => Behavior::Rushing,
            Some("mismatched-recognition") => Behavior::MismatchedRecognition,
            Some(b) => bail!("unknown behavior {b}"),
        };
        let mut adv = AdversaryModel::new(corrupted, behavior);
        if let Some(o) = self.offset {
            adv = adv.with_param("offset", o);
        }
        adv.validate(self.m())?;
        Ok(adv)
    }

    /// Inputs given on the command line, one vector of length `c` per party.
    pub fn parsed_inputs(&self, field: &Field, m: usize, c: usize) -> Result<Option<Vec<FieldVector>>> {
        let Some(text) = &self.inputs else { return Ok(None) };
        let rows: Vec<&str> = text.split(';').map(str::trim).collect();
        if rows.len() != m {
            bail!("--inputs lists {} parties, expected {m}", rows.len());
        }
        rows.into_iter()
            .map(|row| {
                let vals = row
                    .split(',')
                    .map(|v| v.trim().parse::<u32>().with_context(|| format!("bad input symbol {v:?}")))
                    .collect::<Result<Vec<_>>>()?;
                if vals.len() != c {
                    bail!("input {row:?} has {} symbols, expected {c}", vals.len());
                }
                Ok(field.vector(vals)?)
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

/// "2,3" into party ids.
pub fn parties(list: Option<&str>) -> Result<Vec<PartyId>> {
    let Some(list) = list else { return Ok(Vec::new()) };
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Ok(PartyId::new(s.parse().with_context(|| format!("bad party {s:?}"))?)?))
        .collect()
}

pub fn indices(list: Option<&str>) -> Result<Vec<usize>> {
    Ok(parties(list)?.into_iter().map(PartyId::get).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_base() {
        let base = Params { m: Some(4), q: Some(3), ..Default::default() };
        let p = Params { m: Some(5), ..Default::default() }.over(&base);
        assert_eq!((p.m, p.q), (Some(5), Some(3)));
    }

    #[test]
    fn with_value_types_by_field() {
        let p = Params::default();
        assert_eq!(p.with_value("q", "5").unwrap().q, Some(5));
        assert_eq!(p.with_value("noise", "depolarizing:0.1").unwrap().noise.as_deref(), Some("depolarizing:0.1"));
        assert_eq!(p.with_value("colluders", "3").unwrap().colluders.as_deref(), Some("3"));
        assert_eq!(p.with_value("literal-bell", "true").unwrap().literal_bell, Some(true));
        assert!(p.with_value("q", "two").is_err());
        assert!(p.with_value("nope", "1").is_err());
    }

    #[test]
    fn field_from_q_or_prime_power() {
        assert_eq!(Params { q: Some(9), ..Default::default() }.field().unwrap().order(), 9);
        assert_eq!(Params { p: Some(2), ell: Some(3), ..Default::default() }.field().unwrap().order(), 8);
        assert!(Params { q: Some(4), p: Some(2), ..Default::default() }.field().is_err());
        assert!(Params { q: Some(6), ..Default::default() }.field().is_err());
    }

    #[test]
    fn noise_and_inputs_parse() {
        let f = Field::prime(3).unwrap();
        let p = Params { noise: Some("dephasing:0.2".into()), inputs: Some("1,2;0,0;2,1".into()), ..Default::default() };
        assert!(matches!(p.noise(&f, 3).unwrap(), NoiseModel::Dephasing(e) if e == 0.2));
        let ins = p.parsed_inputs(&f, 3, 2).unwrap().unwrap();
        assert_eq!(ins[2].values(), &[2, 1]);
        assert!(p.parsed_inputs(&f, 2, 2).is_err());
        assert!(Params { noise: Some("depolarizing".into()), ..Default::default() }.noise(&f, 3).is_err());
    }

    #[test]
    fn adversary_defaults_and_validation() {
        let p = Params { corrupted: Some("2".into()), ..Default::default() };
        assert_eq!(p.adversary(Behavior::Rushing).unwrap().behavior, Behavior::Rushing);
        let p = Params { corrupted: Some("1,2,3".into()), ..Default::default() };
        assert!(p.adversary(Behavior::SemiHonest).is_err());
        assert!(Params::default().adversary(Behavior::Rushing).unwrap().corrupted.is_empty());
    }
}
