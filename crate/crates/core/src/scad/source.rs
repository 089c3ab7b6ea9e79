use std::path::{Path, PathBuf};

/// Program text plus an index of line start offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceFile {
    pub path: PathBuf,
    pub text: String,
    pub line_index: Vec<usize>,
}

impl SourceFile {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut line_index = vec![0];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' && i + 1 < text.len() {
                line_index.push(i + 1);
            }
        }
        Self {
            path: path.into(),
            text,
            line_index,
        }
    }

    pub fn inline(text: &str) -> Self {
        Self::new("<input>", text)
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(path, text))
    }

    pub fn line_count(&self) -> usize {
        if self.text.is_empty() {
            0
        } else {
            self.line_index.len()
        }
    }

    /// 1-based line text without the trailing newline.
    pub fn line(&self, line: u32) -> Option<&str> {
        let idx = (line as usize).checked_sub(1)?;
        let start = *self.line_index.get(idx)?;
        let end = self
            .line_index
            .get(idx + 1)
            .map(|&e| e - 1)
            .unwrap_or(self.text.len());
        let s = &self.text[start..end];
        let s = s.strip_suffix('\n').unwrap_or(s);
        Some(s.strip_suffix('\r').unwrap_or(s))
    }

    pub fn lines(&self) -> Vec<&str> {
        (1..=self.line_count() as u32).filter_map(|l| self.line(l)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_index_is_strictly_increasing() {
        let src = SourceFile::inline("a\nbb\n\nccc\n");
        assert_eq!(src.line_index, vec![0, 2, 5, 6]);
        assert!(src.line_index.windows(2).all(|w| w[0] < w[1]));
        assert!(*src.line_index.last().unwrap() <= src.text.len());
        assert_eq!(src.line(2), Some("bb"));
        assert_eq!(src.line(3), Some(""));
        assert_eq!(src.line(4), Some("ccc"));
        assert_eq!(src.line(5), None);
        assert_eq!(src.line_count(), 4);
    }
}
