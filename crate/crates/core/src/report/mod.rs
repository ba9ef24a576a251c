//! Final report rows and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{Organization, Phase, Workspace};

pub const CSV_HEADER: [&str; 6] = ["theme", "reviewed_code", "code", "post_id", "quote", "explanation"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "theme")]
    pub theme_name: String,
    #[serde(rename = "reviewed_code")]
    pub reviewed_code_label: String,
    #[serde(rename = "code")]
    pub code_label: String,
    pub post_id: String,
    pub quote: String,
    pub explanation: String,
}

impl ReportRow {
    fn theme_major_key(&self) -> [&str; 6] {
        [
            &self.theme_name,
            &self.reviewed_code_label,
            &self.code_label,
            &self.post_id,
            &self.quote,
            &self.explanation,
        ]
    }

    fn post_major_key(&self) -> [&str; 6] {
        [
            &self.post_id,
            &self.code_label,
            &self.theme_name,
            &self.reviewed_code_label,
            &self.quote,
            &self.explanation,
        ]
    }
}

/// One row per verified application. Refuses while any of phases 1 to 5
/// is stale.
pub fn build_report(ws: &Workspace, organization: Organization) -> Result<Vec<ReportRow>> {
    let d = &ws.data;
    if !d.is_complete(Phase::Themes) {
        return Err(Error::PhaseOrder("themes must be generated before the report".into()));
    }
    let stale: Vec<Phase> = d.stale_phases().into_iter().filter(|p| *p != Phase::Report).collect();
    if !stale.is_empty() {
        return Err(Error::StaleState(stale));
    }
    let mut rows = Vec::with_capacity(d.coding.applications.len());
    for a in d.coding.applications.iter().filter(|a| a.verified) {
        let code = d
            .coding
            .code(&a.code_id)
            .ok_or_else(|| Error::Corrupt(format!("application {} has no code", a.application_id)))?;
        let cluster = d
            .review
            .buckets
            .bucket_of(&a.code_id)
            .ok_or_else(|| Error::Corrupt(format!("code {} is in no reviewed code", a.code_id)))?;
        let theme = d
            .themes
            .buckets
            .bucket_of(&a.code_id)
            .ok_or_else(|| Error::Corrupt(format!("code {} is in no theme", a.code_id)))?;
        rows.push(ReportRow {
            theme_name: theme.name.clone(),
            reviewed_code_label: cluster.name.clone(),
            code_label: code.label.clone(),
            post_id: a.post_id.clone(),
            quote: a.quote.clone(),
            explanation: a.explanation.clone(),
        });
    }
    match organization {
        Organization::ThemeAndCode => rows.sort_by(|a, b| a.theme_major_key().cmp(&b.theme_major_key())),
        Organization::PostByPost => rows.sort_by(|a, b| a.post_major_key().cmp(&b.post_major_key())),
    }
    Ok(rows)
}

/// RFC 4180 with LF line endings; fields are quoted only when needed.
pub fn to_csv_bytes(rows: &[ReportRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .has_headers(false)
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.theme_major_key()).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}

pub fn export_csv(rows: &[ReportRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::PreconditionFailed("the report has no rows".into()));
    }
    let bytes = to_csv_bytes(rows)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads rows back with a generic CSV reader.
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<ReportRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidArgument(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::InvalidArgument(format!("csv: {e}"))))
        .collect()
}
