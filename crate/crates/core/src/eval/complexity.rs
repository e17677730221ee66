//! Size of a generated app: interactive elements and code tokens.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::harness::{InteractiveElement, RenderError, Renderer};
use crate::tokenize::count_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityMetrics {
    pub interactive_elements: usize,
    /// Whitespace-and-punctuation tokens of the app source.
    pub code_tokens: usize,
}

pub fn measure_complexity(source: &str, elements: &[InteractiveElement]) -> ComplexityMetrics {
    ComplexityMetrics { interactive_elements: elements.len(), code_tokens: count_tokens(source) }
}

pub fn measure_site_complexity(source: &str, renderer: &Renderer, site: &Path) -> Result<ComplexityMetrics, RenderError> {
    Ok(measure_complexity(source, &renderer.extract_interactive_elements(site)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{compile, BuildOptions, TemplateKind};
    use crate::testkit::{fixture_html, raster_renderer, static_scaffold};

    /// Reference tokenizer: words are maximal alphanumeric/underscore runs,
    /// every other visible character stands alone.
    fn oracle_tokens(s: &str) -> usize {
        let mut n = 0;
        let mut in_word = false;
        for c in s.chars() {
            let word = c.is_alphanumeric() || c == '_';
            if word && !in_word {
                n += 1;
            }
            if !word && !c.is_whitespace() {
                n += 1;
            }
            in_word = word;
        }
        n
    }

    #[test]
    fn empty_source_and_blank_page() {
        let dir = tempfile::tempdir().unwrap();
        let site = compile("<p></p>", &static_scaffold(), TemplateKind::BlockHost, &dir.path().join("s"), &BuildOptions::default())
            .unwrap()
            .site_dir
            .unwrap();
        let m = measure_site_complexity("", &raster_renderer(), &site).unwrap();
        assert_eq!(m, ComplexityMetrics { interactive_elements: 0, code_tokens: 0 });
    }

    #[test]
    fn counter_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let src = fixture_html("counter-app.html");
        let site = compile(&src, &static_scaffold(), TemplateKind::BlockHost, &dir.path().join("s"), &BuildOptions::default())
            .unwrap()
            .site_dir
            .unwrap();
        let r = raster_renderer();
        let m = measure_site_complexity(&src, &r, &site).unwrap();
        assert_eq!(m, ComplexityMetrics { interactive_elements: 5, code_tokens: oracle_tokens(&src) });
        assert_eq!(measure_site_complexity(&src, &r, &site).unwrap(), m);
    }
}
