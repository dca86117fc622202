//! Text formats for distributions, families, partitions and reports.
//!
//! Distribution (TOML):
//!
//! ```text
//! domain_size = 3
//! labels = ["a", "b", "c"]      # optional
//! mass = ["1/2", "0.25", 0.25]
//! ```
//!
//! Family (plain text): `key = value` header lines, a `---` line, then one
//! row of `N` values per function, optionally prefixed by `name:`.
//!
//! ```text
//! domain_size = 3
//! count = 2
//! closed_under_negation = false
//! ---
//! first: 1 0 0
//! 1/2 1/2 0
//! ```
//!
//! Partition: the first line is `m`, followed by `N` labels, one per line.
//! The sidecar CSV has columns `part,weight,v` with exact values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{KStarResult, SandwichReport};
use crate::distributions::{Domain, ProbDist};
use crate::error::{Error, Result};
use crate::function_families::{ComplexityTag, Family, TestFunction};
use crate::multicalibration::Partition;
use crate::scalar::Scalar;

fn toml_scalar<S: Scalar>(v: &toml::Value) -> Result<S> {
    match v {
        toml::Value::String(s) => S::parse_value(s),
        toml::Value::Integer(i) => S::parse_value(&i.to_string()),
        toml::Value::Float(f) => Ok(S::from_f64_decimal(*f)),
        other => Err(Error::Parse(format!("mass entry {other} is not a number"))),
    }
}

pub fn parse_distribution<S: Scalar>(text: &str) -> Result<ProbDist<S>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let n = table
        .get("domain_size")
        .and_then(toml::Value::as_integer)
        .ok_or_else(|| Error::Parse("missing integer `domain_size`".into()))?;
    let n = usize::try_from(n).map_err(|_| Error::Parse(format!("bad domain_size {n}")))?;
    let mass = table
        .get("mass")
        .and_then(toml::Value::as_array)
        .ok_or_else(|| Error::Parse("missing array `mass`".into()))?
        .iter()
        .map(toml_scalar)
        .collect::<Result<Vec<S>>>()?;
    let domain = match table.get("labels") {
        None => Domain::new(n)?,
        Some(v) => {
            let labels = v
                .as_array()
                .ok_or_else(|| Error::Parse("`labels` must be an array".into()))?
                .iter()
                .map(|l| l.as_str().map(str::to_owned).ok_or_else(|| Error::Parse("labels must be strings".into())))
                .collect::<Result<Vec<_>>>()?;
            Domain::with_labels(labels)?
        }
    };
    if domain.size() != n {
        return Err(Error::Parse(format!("{} labels for domain_size {n}", domain.size())));
    }
    ProbDist::with_domain(domain, mass)
}

pub fn distribution_to_toml<S: Scalar>(dist: &ProbDist<S>) -> String {
    let mut table = toml::Table::new();
    table.insert("domain_size".into(), toml::Value::Integer(dist.len() as i64));
    if let Some(labels) = dist.domain().labels() {
        table.insert("labels".into(), toml::Value::Array(labels.iter().cloned().map(toml::Value::String).collect()));
    }
    table.insert(
        "mass".into(),
        toml::Value::Array(dist.mass().iter().map(|m| toml::Value::String(m.to_repr())).collect()),
    );
    toml::to_string(&table).expect("plain tables serialize")
}

pub fn read_distribution<S: Scalar>(path: &Path) -> Result<ProbDist<S>> {
    parse_distribution(&fs::read_to_string(path)?)
}

pub fn write_distribution<S: Scalar>(path: &Path, dist: &ProbDist<S>) -> Result<()> {
    Ok(fs::write(path, distribution_to_toml(dist))?)
}

fn header_value<'a>(header: &'a [(String, String)], key: &str) -> Option<&'a str> {
    header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn parse_header_num<T: std::str::FromStr>(header: &[(String, String)], key: &str) -> Result<Option<T>> {
    header_value(header, key)
        .map(|v| v.parse::<T>().map_err(|_| Error::Parse(format!("bad value for `{key}`: {v:?}"))))
        .transpose()
}

pub fn parse_family<S: Scalar>(text: &str) -> Result<Family<S>> {
    let mut header = Vec::new();
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    for line in lines.by_ref() {
        if line == "---" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("header line without `=`: {line:?}")))?;
        header.push((k.trim().to_owned(), v.trim().trim_matches('"').to_owned()));
    }
    let n: usize =
        parse_header_num(&header, "domain_size")?.ok_or_else(|| Error::Parse("missing `domain_size`".into()))?;
    let count: Option<usize> = parse_header_num(&header, "count")?;
    let closed: bool = parse_header_num(&header, "closed_under_negation")?.unwrap_or(false);
    let complexity = ComplexityTag {
        q: parse_header_num(&header, "complexity_q")?.unwrap_or(0),
        t: parse_header_num(&header, "complexity_t")?.unwrap_or(0),
        note: header_value(&header, "complexity_note").unwrap_or_default().to_owned(),
    };
    let mut functions = Vec::new();
    for (i, line) in lines.enumerate() {
        let (name, body) = match line.split_once(':') {
            Some((name, body)) => (name.trim().to_owned(), body),
            None => (format!("f{i}"), line),
        };
        let values = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(S::parse_value)
            .collect::<Result<Vec<S>>>()?;
        if values.len() != n {
            return Err(Error::Parse(format!("function {name:?} has {} values, expected {n}", values.len())));
        }
        functions.push(TestFunction::new(name, values)?);
    }
    if let Some(c) = count {
        if c != functions.len() {
            return Err(Error::Parse(format!("header count {c} but {} functions", functions.len())));
        }
    }
    if functions.is_empty() {
        return Err(Error::EmptyFamily);
    }
    Family::new(functions, closed, complexity)
}

pub fn family_to_text<S: Scalar>(family: &Family<S>) -> String {
    let tag = family.complexity();
    let mut out = format!(
        "domain_size = {}\ncount = {}\nclosed_under_negation = {}\ncomplexity_q = {}\ncomplexity_t = {}\ncomplexity_note = \"{}\"\n---\n",
        family.domain_size().unwrap_or(0),
        family.len(),
        family.closed_under_negation(),
        tag.q,
        tag.t,
        tag.note
    );
    for f in family.functions() {
        let values: Vec<String> = f.values().iter().map(S::to_repr).collect();
        out.push_str(&format!("{}: {}\n", f.name().replace(':', "_"), values.join(" ")));
    }
    out
}

pub fn read_family<S: Scalar>(path: &Path) -> Result<Family<S>> {
    parse_family(&fs::read_to_string(path)?)
}

pub fn write_family<S: Scalar>(path: &Path, family: &Family<S>) -> Result<()> {
    Ok(fs::write(path, family_to_text(family))?)
}

/// Labels file and sidecar CSV for a partition.
pub fn partition_to_text<S: Scalar>(partition: &Partition<S>) -> Result<(String, String)> {
    let mut labels = format!("{}\n", partition.m());
    for &l in partition.labeling() {
        labels.push_str(&format!("{l}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["part", "weight", "v"]).map_err(csv_err)?;
    for p in 0..partition.m() {
        w.write_record([p.to_string(), partition.part_weights()[p].to_repr(), partition.v()[p].to_repr()])
            .map_err(csv_err)?;
    }
    let sidecar = String::from_utf8(w.into_inner().map_err(|e| Error::Parse(e.to_string()))?)
        .expect("csv output is utf-8");
    Ok((labels, sidecar))
}

pub fn parse_partition<S: Scalar>(labels: &str, sidecar: &str) -> Result<Partition<S>> {
    let mut lines = labels.lines().map(str::trim).filter(|l| !l.is_empty());
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("not a label: {s:?}")));
    let m = parse_usize(lines.next().ok_or_else(|| Error::Parse("empty partition file".into()))?)?;
    let labeling = lines.map(parse_usize).collect::<Result<Vec<_>>>()?;
    let mut weights = vec![None; m];
    let mut v = vec![None; m];
    let mut rdr = csv::Reader::from_reader(sidecar.as_bytes());
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        if row.len() != 3 {
            return Err(Error::Parse(format!("sidecar row has {} fields", row.len())));
        }
        let p = parse_usize(&row[0])?;
        if p >= m {
            return Err(Error::Parse(format!("sidecar part {p} not below {m}")));
        }
        weights[p] = Some(S::parse_value(&row[1])?);
        v[p] = Some(S::parse_value(&row[2])?);
    }
    let missing = || Error::Parse("sidecar is missing a part".into());
    let weights = weights.into_iter().map(|w| w.ok_or_else(missing)).collect::<Result<Vec<_>>>()?;
    let v = v.into_iter().map(|x| x.ok_or_else(missing)).collect::<Result<Vec<_>>>()?;
    Partition::from_parts(labeling, m, weights, v)
}

/// `<path>.parts.csv` next to the labels file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".parts.csv");
    PathBuf::from(name)
}

pub fn write_partition<S: Scalar>(path: &Path, partition: &Partition<S>) -> Result<()> {
    let (labels, sidecar) = partition_to_text(partition)?;
    fs::write(path, labels)?;
    Ok(fs::write(sidecar_path(path), sidecar)?)
}

pub fn read_partition<S: Scalar>(path: &Path) -> Result<Partition<S>> {
    parse_partition(&fs::read_to_string(path)?, &fs::read_to_string(sidecar_path(path))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(fs::write(path, text + "\n")?)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub const REPORT_COLUMNS: [&str; 8] =
    ["k", "tv_tilde_k", "upper", "floor", "achieved", "achieved_ci", "family_adv", "method"];

/// One row per record; each record's sandwich is re-checked before it is
/// written. With `k_star`, an extra column repeats the sweep's answer.
pub fn write_report_csv<W: Write>(out: W, report: &SandwichReport, k_star: Option<Option<usize>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = REPORT_COLUMNS.to_vec();
    if k_star.is_some() {
        header.push("k_star");
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in &report.records {
        r.check()?;
        let mut row = vec![
            r.k.to_string(),
            r.tv_tilde_k.to_string(),
            r.upper.to_string(),
            r.floor.to_string(),
            r.achieved.value.to_string(),
            r.achieved.ci_halfwidth.to_string(),
            r.measured_family_adv.map(|v| v.to_string()).unwrap_or_default(),
            r.achieved.method.as_str().to_string(),
        ];
        if let Some(ks) = k_star {
            row.push(ks.map(|k| k.to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `k,achieved` for every point of a sweep curve, plus the `k_star` column.
pub fn write_curve_csv<W: Write>(out: W, result: &KStarResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "achieved", "k_star"]).map_err(csv_err)?;
    let ks = result.k_star.map(|k| k.to_string()).unwrap_or_default();
    for p in &result.curve {
        w.write_record([p.k.to_string(), p.achieved.to_string(), ks.clone()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::mixture;
    use crate::multicalibration::target_g;
    use crate::scalar::Rational;

    #[test]
    fn distribution_round_trip() {
        let text = "domain_size = 3\nlabels = [\"a\", \"b\", \"c\"]\nmass = [\"1/3\", \"0.5\", 0.1666666666666666]\n";
        assert!(parse_distribution::<Rational>(text).is_err());
        let text = "domain_size = 3\nmass = [\"1/3\", \"0.5\", \"1/6\"]\n";
        let d = parse_distribution::<Rational>(text).unwrap();
        assert_eq!(parse_distribution::<Rational>(&distribution_to_toml(&d)).unwrap(), d);
        let labeled = "domain_size = 2\nlabels = [\"t\", \"h\"]\nmass = [0.25, 0.75]\n";
        let d = parse_distribution::<Rational>(labeled).unwrap();
        assert_eq!(d.domain().labels().unwrap()[1], "h");
        assert_eq!(parse_distribution::<Rational>(&distribution_to_toml(&d)).unwrap(), d);
        assert!(parse_distribution::<Rational>("domain_size = 2\nmass = [\"0.6\", \"0.6\"]").is_err());
        assert!(parse_distribution::<f64>("domain_size = 2\nmass = [0.25, 0.75]").is_ok());
    }

    #[test]
    fn family_round_trip() {
        let text = "domain_size = 3\ncount = 2\n---\nfirst: 1 0 0\n1/2, 1/2, 0\n";
        let f = parse_family::<Rational>(text).unwrap();
        assert_eq!(f.functions()[0].name(), "first");
        assert_eq!(f.functions()[1].name(), "f1");
        assert_eq!(parse_family::<Rational>(&family_to_text(&f)).unwrap(), f);
        assert!(parse_family::<Rational>("domain_size = 3\ncount = 3\n---\n1 0 0\n").is_err());
        assert!(parse_family::<Rational>("domain_size = 3\n---\n1 0\n").is_err());
        assert!(parse_family::<Rational>("domain_size = 2\nclosed_under_negation = true\n---\n1 0\n").is_err());
    }

    #[test]
    fn partition_round_trip() {
        let x0 = ProbDist::<Rational>::new(vec![
            Rational::new(1.into(), 3.into()),
            Rational::new(1.into(), 3.into()),
            Rational::new(1.into(), 3.into()),
        ])
        .unwrap();
        let x1 = ProbDist::bernoulli(Rational::new(1.into(), 7.into())).unwrap();
        let x1 = ProbDist::new(vec![x1.get(0).clone(), x1.get(1).clone(), Rational::from_integer(0.into())]).unwrap();
        let d = mixture(&x0, &x1).unwrap();
        let g = target_g(&x0, &x1).unwrap();
        let p = Partition::from_labeling(vec![0, 1, 0], 2, &d, &g).unwrap();
        let (labels, sidecar) = partition_to_text(&p).unwrap();
        let back = parse_partition::<Rational>(&labels, &sidecar).unwrap();
        assert_eq!(back, p);
        assert_eq!(partition_to_text(&back).unwrap(), (labels, sidecar));
    }
}
