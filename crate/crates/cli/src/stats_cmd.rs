//! `tlens stats ...`: flag or CSV input, JSON or text output.

use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};
use tlens_core::stats::{auc, d_prime_c_prime, oneway_anova, spearman_rho};

use crate::args::{AnovaArgs, DprimeArgs, PairArgs, StatsCommand};

/// Two-column rows; a first row that does not parse is taken as a header.
fn read_rows(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        if record.len() != 2 {
            bail!(
                "{}: row {} has {} columns, expected 2",
                path.display(),
                i + 1,
                record.len()
            );
        }
        rows.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(rows)
}

fn number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// True for 1, true, yes, signal or ai; false for 0, false, no, noise or human.
fn binary(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "signal" | "ai" => Some(true),
        "0" | "false" | "no" | "noise" | "human" => Some(false),
        _ => None,
    }
}

fn parse_rows<A, B>(
    path: &Path,
    left: impl Fn(&str) -> Option<A>,
    right: impl Fn(&str) -> Option<B>,
) -> Result<Vec<(A, B)>> {
    let rows = read_rows(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, (a, b)) in rows.iter().enumerate() {
        match (left(a), right(b)) {
            (Some(a), Some(b)) => out.push((a, b)),
            _ if i == 0 => continue,
            _ => bail!("{}: row {} (`{a},{b}`) is not valid", path.display(), i + 1),
        }
    }
    Ok(out)
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub hits: u64,
    pub misses: u64,
    pub false_alarms: u64,
    pub correct_rejections: u64,
}

pub fn tally(trials: &[(bool, bool)]) -> Counts {
    let mut c = Counts::default();
    for &(signal, said_signal) in trials {
        match (signal, said_signal) {
            (true, true) => c.hits += 1,
            (true, false) => c.misses += 1,
            (false, true) => c.false_alarms += 1,
            (false, false) => c.correct_rejections += 1,
        }
    }
    c
}

fn dprime(a: &DprimeArgs) -> Result<Value> {
    let c = match (&a.input, a.hits) {
        (Some(path), _) => tally(&parse_rows(path, binary, binary)?),
        (None, Some(hits)) => Counts {
            hits,
            misses: a.misses.unwrap_or(0),
            false_alarms: a.fa.unwrap_or(0),
            correct_rejections: a.cr.unwrap_or(0),
        },
        (None, None) => bail!("give --hits/--misses/--fa/--cr or --input"),
    };
    let r = d_prime_c_prime(c.hits, c.misses, c.false_alarms, c.correct_rejections)?;
    Ok(json!({
        "d_prime": r.d_prime,
        "c_prime": r.c_prime,
        "hit_rate": r.hit_rate,
        "false_alarm_rate": r.false_alarm_rate,
        "hits": c.hits,
        "misses": c.misses,
        "false_alarms": c.false_alarms,
        "correct_rejections": c.correct_rejections,
    }))
}

fn anova(a: &AnovaArgs) -> Result<Value> {
    let (names, groups): (Vec<String>, Vec<Vec<f64>>) = match &a.input {
        Some(path) => {
            let mut names: Vec<String> = Vec::new();
            let mut groups: Vec<Vec<f64>> = Vec::new();
            for (name, v) in parse_rows(path, |s| Some(s.to_string()), number)? {
                match names.iter().position(|n| *n == name) {
                    Some(i) => groups[i].push(v),
                    None => {
                        names.push(name);
                        groups.push(vec![v]);
                    }
                }
            }
            (names, groups)
        }
        None => {
            let groups = a
                .group
                .iter()
                .map(|g| {
                    g.split(',')
                        .map(|v| number(v.trim()).ok_or_else(|| anyhow!("`{v}` in --group is not a number")))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            ((1..=groups.len()).map(|i| format!("group{i}")).collect(), groups)
        }
    };
    let r = oneway_anova(&groups)?;
    Ok(json!({
        "f": r.f,
        "df_between": r.df_between,
        "df_within": r.df_within,
        "ss_between": r.ss_between,
        "ss_within": r.ss_within,
        "groups": names.iter().zip(&groups).map(|(n, g)| json!({"name": n, "n": g.len()})).collect::<Vec<_>>(),
    }))
}

fn pairs(a: &PairArgs) -> Result<(Vec<f64>, Vec<f64>)> {
    match &a.input {
        Some(path) => Ok(parse_rows(path, number, number)?.into_iter().unzip()),
        None => Ok((a.x.clone(), a.y.clone())),
    }
}

pub fn run(cmd: &StatsCommand) -> Result<Value> {
    match cmd {
        StatsCommand::Dprime(a) => dprime(a),
        StatsCommand::Anova(a) => anova(a),
        StatsCommand::Spearman(a) => {
            let (x, y) = pairs(a)?;
            Ok(json!({ "spearman_rho": spearman_rho(&x, &y)?, "n": x.len() }))
        }
        StatsCommand::Auc(a) => {
            let (scores, labels) = pairs(a)?;
            Ok(json!({ "auc": auc(&scores, &labels)?, "n": scores.len() }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn tally_counts_each_cell() {
        let c = tally(&[(true, true), (true, true), (true, false), (false, true), (false, false)]);
        assert_eq!(
            c,
            Counts {
                hits: 2,
                misses: 1,
                false_alarms: 1,
                correct_rejections: 1
            }
        );
    }

    #[test]
    fn header_row_is_skipped_and_bad_rows_rejected() {
        let f = csv("label,response\nai,1\nhuman,0\n");
        assert_eq!(
            parse_rows(f.path(), binary, binary).unwrap(),
            [(true, true), (false, false)]
        );
        let f = csv("1,1\nmaybe,0\n");
        assert!(parse_rows(f.path(), binary, binary).is_err());
        let f = csv("1,1,1\n");
        assert!(read_rows(f.path()).is_err());
    }

    #[test]
    fn anova_groups_keep_first_appearance_order() {
        let f = csv("group,value\nb,1\na,4\nb,2\na,5\nb,3\na,6\n");
        let v = anova(&AnovaArgs {
            group: vec![],
            input: Some(f.path().to_path_buf()),
        })
        .unwrap();
        assert_eq!(v["groups"][0]["name"], "b");
        assert_eq!(v["df_between"], 1);
        assert_eq!(v["df_within"], 4);
        assert!((v["f"].as_f64().unwrap() - 13.5).abs() < 1e-12);
    }
}
