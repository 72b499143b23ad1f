//! Matrix, score, and summary files.
//!
//! Matrices are CSV (one sample per row) or `f32le`: a 16-byte header
//! (`OIDM`, row count, column count as little-endian `u32`, four zero bytes)
//! followed by row-major little-endian `f32` values. Floats are always
//! written in shortest round-trip decimal form.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{IdSummary, Label, ScoreReport};
use crate::error::{Error, Result};
use crate::geometry::{FeatureMatrix, NormKind};

pub const SUMMARY_VERSION: u32 = 1;
pub const MAGIC: &[u8; 4] = b"OIDM";
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    #[default]
    Csv,
    F32le,
}

impl std::str::FromStr for MatrixFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MatrixFormat::Csv),
            "f32le" => Ok(MatrixFormat::F32le),
            other => Err(format!("unknown matrix format `{other}` (expected csv or f32le)")),
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_err(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

pub fn read_matrix(path: &Path, format: MatrixFormat, header: bool) -> Result<FeatureMatrix> {
    let mut file = open(path)?;
    match format {
        MatrixFormat::Csv => read_csv(file, header),
        MatrixFormat::F32le => {
            let mut bytes = Vec::new();
            file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
            decode_f32le(&bytes)
        }
    }
}

/// Parses CSV rows of decimal floats. Line numbers in errors are 1-based.
pub fn read_csv(reader: impl Read, header: bool) -> Result<FeatureMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut dim = None;
    let mut data = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let expected = *dim.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows {
                line,
                expected,
                found: record.len(),
            });
        }
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, i + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, i + 1, format!("`{field}` is not finite")));
            }
            data.push(v);
        }
    }
    match dim {
        None | Some(0) => Err(Error::EmptyInput("matrix file has no data rows")),
        Some(d) => FeatureMatrix::from_flat(d, data),
    }
}

pub fn decode_f32le(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(0, bytes.len(), "truncated header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"));
    let (rows, cols, reserved) = (word(4) as usize, word(8) as usize, word(12));
    if reserved != 0 {
        return Err(parse_err(0, 12, "reserved header bytes must be zero"));
    }
    if cols == 0 {
        return Err(parse_err(0, 8, "column count is zero"));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| parse_err(0, 4, "matrix size overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(parse_err(
            0,
            HEADER_LEN,
            format!("payload has {} bytes, expected {expected}", payload.len()),
        ));
    }
    if rows == 0 {
        return Err(Error::EmptyInput("matrix file has no data rows"));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    FeatureMatrix::from_flat(cols, data)
}

pub fn encode_f32le(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let too_big = |what: &'static str, n: usize| Error::range(what, n as f64, "[0, 2^32)");
    let rows = u32::try_from(m.rows()).map_err(|_| too_big("rows", m.rows()))?;
    let cols = u32::try_from(m.dim()).map_err(|_| too_big("cols", m.dim()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_flat().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    for &v in m.as_flat() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn encode_csv(m: &FeatureMatrix) -> String {
    let mut out = String::new();
    for row in m.iter_rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &FeatureMatrix, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Csv => encode_csv(m).into_bytes(),
        MatrixFormat::F32le => encode_f32le(m)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One line of a score file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    pub score: f64,
    pub delta_mu_term: f64,
    pub shell_term: f64,
    pub best_shell: usize,
    pub label: Option<Label>,
}

impl From<&ScoreReport> for ScoreRow {
    fn from(r: &ScoreReport) -> Self {
        Self {
            score: r.score,
            delta_mu_term: r.delta_mu_term,
            shell_term: r.shell_term,
            best_shell: r.best_shell,
            label: None,
        }
    }
}

pub const SCORE_HEADER: &str = "score,delta_mu_term,shell_term,best_shell";

/// Writes score rows as CSV. A `label` column is added when every row has one.
pub fn write_score_rows(out: &mut impl Write, rows: &[ScoreRow]) -> std::io::Result<()> {
    let labelled = !rows.is_empty() && rows.iter().all(|r| r.label.is_some());
    if labelled {
        writeln!(out, "{SCORE_HEADER},label")?;
    } else {
        writeln!(out, "{SCORE_HEADER}")?;
    }
    for r in rows {
        write!(out, "{},{},{},{}", r.score, r.delta_mu_term, r.shell_term, r.best_shell)?;
        match r.label.filter(|_| labelled) {
            Some(l) => writeln!(out, ",{l}")?,
            None => writeln!(out)?,
        }
    }
    Ok(())
}

pub fn write_scores(path: &Path, reports: &[ScoreReport]) -> Result<()> {
    let rows: Vec<ScoreRow> = reports.iter().map(ScoreRow::from).collect();
    save_score_rows(path, &rows)
}

pub fn save_score_rows(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = create(path)?;
    write_score_rows(&mut w, rows)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_score_rows(reader: impl Read) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, 0, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_label = match names.as_slice() {
        ["score", "delta_mu_term", "shell_term", "best_shell"] => false,
        ["score", "delta_mu_term", "shell_term", "best_shell", "label"] => true,
        _ => return Err(parse_err(1, 1, format!("unexpected score header `{}`", names.join(",")))),
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let float = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| parse_err(line, i + 1, format!("`{}` is not a number", &rec[i])))
        };
        let label = if with_label {
            Some(match &rec[4] {
                "ID" => Label::Id,
                "OOD" => Label::Ood,
                other => return Err(parse_err(line, 5, format!("unknown label `{other}`"))),
            })
        } else {
            None
        };
        rows.push(ScoreRow {
            score: float(0)?,
            delta_mu_term: float(1)?,
            shell_term: float(2)?,
            best_shell: rec[3]
                .parse()
                .map_err(|_| parse_err(line, 4, format!("`{}` is not a shell index", &rec[3])))?,
            label,
        });
    }
    Ok(rows)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    read_score_rows(open(path)?)
}

/// Reads a list of scores: either a score file (the `score` column is used)
/// or a headerless file with one number per line.
pub fn read_score_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with("score") {
        return Ok(read_score_rows(text.as_bytes())?
            .into_iter()
            .map(|r| r.score)
            .collect());
    }
    let m = read_csv(text.as_bytes(), false)?;
    if m.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: m.dim(),
        });
    }
    Ok(m.as_flat().to_vec())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryDoc {
    version: u32,
    norm_kind: NormKind,
    k: usize,
    #[serde(rename = "r_B_id")]
    r_b_id: f64,
    m: usize,
    mean: Vec<f64>,
    shell_freq: Vec<f64>,
    shell_max_norm: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
}

pub fn summary_to_json(s: &IdSummary) -> String {
    let doc = SummaryDoc {
        version: SUMMARY_VERSION,
        norm_kind: s.norm_kind(),
        k: s.k(),
        r_b_id: s.r_b_id(),
        m: s.m(),
        mean: s.mean().to_vec(),
        shell_freq: s.shell_freq().to_vec(),
        shell_max_norm: s.shell_max_norm().to_vec(),
        center: s.center().map(<[f64]>::to_vec),
    };
    serde_json::to_string(&doc).expect("summary documents always serialize")
}

pub fn summary_from_json(text: &str) -> Result<IdSummary> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| parse_err(e.line() as u64, e.column(), e.to_string()))?;
    let version = value
        .get("version")
        .ok_or_else(|| Error::InvalidSummary("missing `version`".into()))?;
    let version = version
        .as_u64()
        .ok_or_else(|| Error::InvalidSummary(format!("`version` must be an integer, found {version}")))?;
    if version != SUMMARY_VERSION as u64 {
        return Err(Error::SchemaVersionMismatch {
            found: version,
            supported: SUMMARY_VERSION,
        });
    }
    let doc: SummaryDoc =
        serde_json::from_value(value).map_err(|e| Error::InvalidSummary(e.to_string()))?;
    IdSummary::from_parts(
        doc.mean,
        doc.k,
        doc.r_b_id,
        doc.m,
        doc.shell_freq,
        doc.shell_max_norm,
        doc.norm_kind,
        doc.center,
    )
}

pub fn save_summary(path: &Path, s: &IdSummary) -> Result<()> {
    std::fs::write(path, summary_to_json(s)).map_err(|e| Error::io(path, e))
}

pub fn load_summary(path: &Path) -> Result<IdSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    summary_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{fit, score, score_batch};
    use crate::geometry::FeatureVector;
    use proptest::prelude::*;

    #[test]
    fn csv_examples() {
        let m = read_csv("1,2\n3,4".as_bytes(), false).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.as_flat(), &[1.0, 2.0, 3.0, 4.0]);
        let m = read_csv("a,b\n1, 2.5e-1\n".as_bytes(), true).unwrap();
        assert_eq!(m.as_flat(), &[1.0, 0.25]);
    }

    #[test]
    fn csv_errors_carry_locations() {
        match read_csv("1,2\n3,4\n5\n".as_bytes(), false) {
            Err(Error::RaggedRows {
                line: 3,
                expected: 2,
                found: 1,
            }) => {}
            other => panic!("{other:?}"),
        }
        match read_csv("1,2\n3,x\n".as_bytes(), false) {
            Err(Error::Parse { line: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_csv("1,nan\n".as_bytes(), false), Err(Error::Parse { .. })));
        assert!(matches!(read_csv("".as_bytes(), false), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn f32le_round_trip() {
        let m = FeatureMatrix::from_rows(&[[1.5, -2.25, 1e-3], [0.1, 3.0e7, -0.0]]).unwrap();
        let bytes = encode_f32le(&m).unwrap();
        assert_eq!(bytes.len(), 16 + 6 * 4);
        assert_eq!(&bytes[..4], b"OIDM");
        let back = decode_f32le(&bytes).unwrap();
        for (a, b) in m.as_flat().iter().zip(back.as_flat()) {
            assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        }
        assert_eq!(encode_f32le(&back).unwrap(), bytes);
    }

    #[test]
    fn f32le_errors() {
        let m = FeatureMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let good = encode_f32le(&m).unwrap();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_f32le(&bad_magic), Err(Error::BadMagic)));
        assert!(matches!(decode_f32le(&good[..good.len() - 1]), Err(Error::Parse { .. })));
        let mut extra = good.clone();
        extra.push(0);
        assert!(matches!(decode_f32le(&extra), Err(Error::Parse { .. })));
        assert!(matches!(decode_f32le(&good[..10]), Err(Error::Parse { .. })));
    }

    fn sample_summary() -> IdSummary {
        let id = FeatureMatrix::from_rows(&[[0.1, 0.7], [1.0 / 3.0, -2.0], [5.0, 0.25], [-1e-7, 3.3]]).unwrap();
        fit(&id, 50, NormKind::L2, None).unwrap()
    }

    #[test]
    fn score_file_examples() {
        let mut buf = Vec::new();
        write_score_rows(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{SCORE_HEADER}\n"));

        let s = sample_summary();
        let r = score(&FeatureVector::new(vec![0.2, 0.2]).unwrap(), &s).unwrap();
        let mut buf = Vec::new();
        write_score_rows(&mut buf, &[ScoreRow::from(&r)]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);

        let back = read_score_rows(buf.as_slice()).unwrap();
        assert_eq!(back[0].score.to_bits(), r.score.to_bits());
        let mut again = Vec::new();
        write_score_rows(&mut again, &back).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn labelled_score_rows_round_trip() {
        let s = sample_summary();
        let xs = FeatureMatrix::from_rows(&[[0.2, 0.2], [40.0, -3.0]]).unwrap();
        let rows: Vec<ScoreRow> = score_batch(&xs, &s)
            .unwrap()
            .iter()
            .map(|r| ScoreRow {
                label: Some(crate::detector::label_for(r.score, 0.5)),
                ..ScoreRow::from(r)
            })
            .collect();
        let mut buf = Vec::new();
        write_score_rows(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("score,delta_mu_term,shell_term,best_shell,label\n"));
        assert_eq!(read_score_rows(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn summary_round_trip_is_exact() {
        let s = sample_summary();
        let json = summary_to_json(&s);
        let back = summary_from_json(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(summary_to_json(&back), json);
        let probe = FeatureVector::new(vec![0.3, -0.4]).unwrap();
        assert_eq!(score(&probe, &s).unwrap(), score(&probe, &back).unwrap());
    }

    #[test]
    fn summary_json_shape() {
        let id = FeatureMatrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let c = FeatureVector::new(vec![0.5]).unwrap();
        let s = fit(&id, 2, NormKind::Linf, Some(&c)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&summary_to_json(&s)).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["norm_kind"], "linf");
        assert_eq!(v["k"], 2);
        assert_eq!(v["r_B_id"], 1.5);
        assert_eq!(v["m"], 2);
        assert_eq!(v["center"][0], 0.5);
        let plain = fit(&id, 2, NormKind::L2, None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&summary_to_json(&plain)).unwrap();
        assert!(v.get("center").is_none());
    }

    #[test]
    fn summary_load_errors() {
        let json = summary_to_json(&sample_summary());
        assert!(matches!(summary_from_json(&json[..json.len() / 2]), Err(Error::Parse { .. })));
        let future = json.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(
            summary_from_json(&future),
            Err(Error::SchemaVersionMismatch { found: 2, supported: 1 })
        ));
        let unknown = json.replacen("{", "{\"extra\":true,", 1);
        assert!(matches!(summary_from_json(&unknown), Err(Error::InvalidSummary(_))));
        let bad_freq = json.replacen("\"k\":50", "\"k\":49", 1);
        assert!(matches!(summary_from_json(&bad_freq), Err(Error::InvalidSummary(_))));
    }

    #[test]
    fn load_missing_file_is_io() {
        let e = load_summary(Path::new("/nonexistent/summary.json")).unwrap_err();
        assert_eq!(e.class(), crate::error::ErrorClass::Io);
    }

    #[test]
    fn large_summary_stays_compact() {
        let n = 2000;
        let data: Vec<f64> = (0..n * 50).map(|i| ((i * 7919) % 1000) as f64 / 997.0 - 0.5).collect();
        let id = FeatureMatrix::from_flat(n, data).unwrap();
        let s = fit(&id, 100, NormKind::L2, None).unwrap();
        assert!(summary_to_json(&s).len() < 100 * 1024);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(rows in 1usize..10, cols in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() * 2e3 - 1e3).collect();
            let m = FeatureMatrix::from_flat(cols, data).unwrap();
            let text = encode_csv(&m);
            let back = read_csv(text.as_bytes(), false).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(encode_csv(&back), text);
        }

        #[test]
        fn summary_round_trip(data in prop::collection::vec(-1e6f64..1e6, 3..60), k in 1usize..200) {
            let m = FeatureMatrix::from_flat(3, data[..data.len() / 3 * 3].to_vec()).unwrap();
            if let Ok(s) = fit(&m, k, NormKind::L1, None) {
                prop_assert_eq!(summary_from_json(&summary_to_json(&s)).unwrap(), s);
            }
        }
    }
}
