use std::path::PathBuf;

use super::{Corpus, Transcript};
use crate::error::{Error, Result};

/// One transcript per file; id and title are the file stem.
pub fn load_textfiles(paths: &[PathBuf]) -> Result<Corpus> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("no text files given".into()));
    }
    let mut transcripts = Vec::with_capacity(paths.len());
    for path in paths {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let body = String::from_utf8(bytes).map_err(|_| Error::Encoding { path: path.clone() })?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no usable file stem", path.display())))?
            .to_string();
        transcripts.push(Transcript::new(stem.clone(), stem, body, Vec::new(), 0));
    }
    let descriptor = format!("textfiles:{}", paths.len());
    Corpus::new(transcripts, descriptor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_transcript_per_file() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        std::fs::write(&a, "alpha").unwrap();
        std::fs::write(&b, "   ").unwrap();
        let corpus = load_textfiles(&[b.clone(), a.clone()]).unwrap();
        let ids: Vec<_> = corpus.post_ids().collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(corpus.get("a").unwrap().full_text(), "a\nalpha");
        // whitespace-only files are kept; dropping them is the filter's job
        assert!(corpus.get("b").unwrap().is_empty_post());
    }

    #[test]
    fn errors() {
        assert!(matches!(load_textfiles(&[]), Err(Error::EmptyInput(_))));
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, [0xff, 0xfe, 0x00]).unwrap();
        match load_textfiles(&[bad.clone()]) {
            Err(Error::Encoding { path }) => assert_eq!(path, bad),
            other => panic!("unexpected {other:?}"),
        }
    }
}
