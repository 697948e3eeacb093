//! Experiment files: `key = value` lines, `#` comments, and `[name]`
//! sections. Keys before the first section are defaults for every section;
//! a file without sections describes a single experiment.

use std::collections::BTreeMap;

use bppd_core::bench::{DecoderKind, ExperimentConfig};
use bppd_core::frame::shots_for;

pub const KEYS: [&str; 9] = [
    "distance",
    "rounds",
    "p",
    "decoder",
    "m_iter",
    "t_bp",
    "shots",
    "seed",
    "timing_batch",
];

/// Experiment parameters as given, before defaults are applied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Spec {
    pub name: String,
    pub distance: Option<usize>,
    pub rounds: Option<usize>,
    pub p: Option<f64>,
    pub decoder: Option<DecoderKind>,
    pub m_iter: Option<usize>,
    pub t_bp: Option<f64>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub timing_batch: Option<usize>,
}

fn value<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T, String> {
    raw.parse()
        .map_err(|_| format!("line {line}: invalid value {raw:?} for {key}"))
}

impl Spec {
    fn set(&mut self, line: usize, key: &str, raw: &str) -> Result<(), String> {
        match key {
            "distance" => self.distance = Some(value(line, key, raw)?),
            "rounds" => self.rounds = Some(value(line, key, raw)?),
            "p" => self.p = Some(value(line, key, raw)?),
            "decoder" => self.decoder = Some(value(line, key, raw)?),
            "m_iter" => self.m_iter = Some(value(line, key, raw)?),
            "t_bp" => self.t_bp = Some(value(line, key, raw)?),
            "shots" => self.shots = Some(value(line, key, raw)?),
            "seed" => self.seed = Some(value(line, key, raw)?),
            "timing_batch" => self.timing_batch = Some(value(line, key, raw)?),
            _ => {
                return Err(format!(
                    "line {line}: unknown key {key:?} (expected one of {})",
                    KEYS.join(", ")
                ))
            }
        }
        Ok(())
    }

    /// Fills unset fields from `base`.
    pub fn or(self, base: &Spec) -> Spec {
        Spec {
            name: self.name,
            distance: self.distance.or(base.distance),
            rounds: self.rounds.or(base.rounds),
            p: self.p.or(base.p),
            decoder: self.decoder.or(base.decoder),
            m_iter: self.m_iter.or(base.m_iter),
            t_bp: self.t_bp.or(base.t_bp),
            shots: self.shots.or(base.shots),
            seed: self.seed.or(base.seed),
            timing_batch: self.timing_batch.or(base.timing_batch),
        }
    }

    /// Concrete configurations. The decoder defaults to bp+mwpm, and for
    /// bp+mwpm an unset `m_iter` ranges over `{d, 30, d²}` and an unset
    /// `t_bp` over `{0.5, 0.9}`.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>, String> {
        let label = if self.name.is_empty() {
            String::new()
        } else {
            format!("[{}] ", self.name)
        };
        let d = self.distance.ok_or(format!("{label}distance is required"))?;
        let p = self.p.ok_or(format!("{label}p is required"))?;
        let decoder = self.decoder.unwrap_or(DecoderKind::BpMwpm);
        let mut base = ExperimentConfig::new(d, p, decoder);
        base.rounds = self.rounds.unwrap_or(d);
        if let Some(s) = self.shots {
            base.shots = s;
        } else if p > 0.0 {
            base.shots = shots_for(p).map_err(|e| format!("{label}{e}"))?;
        }
        base.seed = self.seed.unwrap_or(0);
        if let Some(b) = self.timing_batch {
            base.timing_batch = b;
        }
        let (m_iters, t_bps) = match decoder {
            DecoderKind::BpMwpm => (
                self.m_iter.map_or_else(|| dedup(vec![d, 30, d * d]), |m| vec![m]),
                self.t_bp.map_or_else(|| vec![0.5, 0.9], |t| vec![t]),
            ),
            _ => (vec![self.m_iter.unwrap_or(base.m_iter)], vec![base.t_bp]),
        };
        let mut out = Vec::new();
        for &m_iter in &m_iters {
            for &t_bp in &t_bps {
                let cfg = ExperimentConfig {
                    m_iter,
                    t_bp,
                    ..base.clone()
                };
                cfg.validate().map_err(|e| format!("{label}{e}"))?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

fn dedup(mut v: Vec<usize>) -> Vec<usize> {
    let mut seen = Vec::new();
    v.retain(|x| {
        let new = !seen.contains(x);
        seen.push(*x);
        new
    });
    v
}

/// Parses an experiment file into one spec per section, defaults applied.
pub fn parse(text: &str) -> Result<Vec<Spec>, String> {
    let mut defaults = Spec::default();
    let mut sections: Vec<Spec> = Vec::new();
    let mut names = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or(format!("line {line}: unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(format!("line {line}: empty section name"));
            }
            if names.insert(name.to_string(), line).is_some() {
                return Err(format!("line {line}: duplicate section [{name}]"));
            }
            sections.push(Spec {
                name: name.to_string(),
                ..Spec::default()
            });
            continue;
        }
        let (key, raw_value) = body
            .split_once('=')
            .ok_or(format!("line {line}: expected key = value"))?;
        let target = sections.last_mut().unwrap_or(&mut defaults);
        target.set(line, key.trim(), raw_value.trim())?;
    }
    if sections.is_empty() {
        return Ok(vec![defaults]);
    }
    Ok(sections.into_iter().map(|s| s.or(&defaults)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_inherit_defaults() {
        let specs = parse(
            "# shared\nseed = 7\np = 0.01\n\n[a]\ndistance = 3\ndecoder = mwpm\n[b]\ndistance = 5\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].name, "a");
        assert_eq!(specs[0].seed, Some(7));
        assert_eq!(specs[0].decoder, Some(DecoderKind::Mwpm));
        assert_eq!(specs[1].seed, Some(9));
        assert_eq!(specs[1].p, Some(0.01));
    }

    #[test]
    fn file_without_sections_is_one_experiment() {
        let specs = parse("distance = 3\np = 0.001\n").unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(specs[0].distance, Some(3));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse("distance 3").unwrap_err().contains("line 1"));
        assert!(parse("colour = red").unwrap_err().contains("unknown key"));
        assert!(parse("p = abc").unwrap_err().contains("invalid value"));
        assert!(parse("[a\n").is_err());
        assert!(parse("[a]\n[a]\n").unwrap_err().contains("duplicate"));
        assert!(parse("decoder = bp").is_err());
    }

    #[test]
    fn bp_mwpm_defaults_expand_to_the_grid() {
        let spec = Spec {
            distance: Some(5),
            p: Some(0.01),
            ..Spec::default()
        };
        let cfgs = spec.expand().unwrap();
        let grid: Vec<(usize, f64)> = cfgs.iter().map(|c| (c.m_iter, c.t_bp)).collect();
        assert_eq!(
            grid,
            vec![(5, 0.5), (5, 0.9), (30, 0.5), (30, 0.9), (25, 0.5), (25, 0.9)]
        );
        assert!(cfgs.iter().all(|c| c.shots == 10_000 && c.rounds == 5));
    }

    #[test]
    fn explicit_parameters_pin_the_grid() {
        let spec = Spec {
            distance: Some(3),
            p: Some(0.01),
            m_iter: Some(30),
            ..Spec::default()
        };
        assert_eq!(spec.expand().unwrap().len(), 2);
        let spec = Spec {
            decoder: Some(DecoderKind::Mwpm),
            ..spec
        };
        assert_eq!(spec.expand().unwrap().len(), 1);
    }

    #[test]
    fn missing_or_invalid_parameters_are_reported() {
        assert!(Spec::default().expand().unwrap_err().contains("distance"));
        let spec = Spec {
            distance: Some(4),
            p: Some(0.01),
            ..Spec::default()
        };
        assert!(spec.expand().unwrap_err().contains("odd"));
    }
}
