//! Planning prompt: the fixed instruction template with the document text
//! substituted at a single placeholder.

use super::{PaperDocument, SectionKind};
use crate::gateway::{ImageAttachment, ModelRequest, Role, Sampling};
use crate::tokenize::{count_tokens, truncate_to_tokens};

pub const PAPER_PLACEHOLDER: &str = "{{PAPER}}";
pub const TRUNCATION_MARKER: &str = "[truncated]";

/// The first paragraph is the instruction text used verbatim; the rest fixes
/// the output layout so the plan can be parsed.
pub const PLANNING_TEMPLATE: &str = "\
You are an expert developer that converts research papers into interactive web demos. Your task is to generate an interactive educational web application that helps users understand the core mechanisms of a research paper. Before generating code, you must:

(1). Identify the key mechanisms in the paper that should be visualized.

(2). Design interactive modules that allow users to explore these mechanisms.

(3). Specify the user controls and visual outputs.

Then generate a complete single-page web application implemented using React and TypeScript.

In this step, write only the specification, not the code. Reply with one fenced block tagged `spec` followed by one fenced block tagged `module` per entry of the numbered Module Plan:

```spec
topic: <one-line summary of what the application teaches>
navigation: sidebar
shell: <page shell and layout requirements>
```

```module
id: <1-based ordinal, matching the block's position>
title: <short navigation label>
mechanism: <the mechanism from the document this module exposes>
control: <slider|button|dropdown|drag-surface|toggle|text-input> | <parameter> | <range or options>
output: <what the user observes>
narrative: <how each control changes the visible state>
```

Repeat `control:` and `output:` lines as needed. Every module needs at least one control and one output.

Paper:
{{PAPER}}
";

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningPromptOptions {
    pub model: String,
    /// Token budget for the inserted document text, title excluded.
    pub token_budget: usize,
    /// Attach extracted figure images in addition to their captions.
    pub attach_figures: bool,
    pub sampling: Sampling,
}

impl Default for PlanningPromptOptions {
    fn default() -> Self {
        Self { model: "planner".into(), token_budget: 6000, attach_figures: false, sampling: Sampling::default() }
    }
}

/// Inserts the document text into the template. The title is always present;
/// the abstract, method sections, remaining sections and figure captions fill
/// the budget in that priority order and are emitted in document order. Any
/// cut or omission appends the truncation marker.
pub fn build_planning_prompt(doc: &PaperDocument, options: &PlanningPromptOptions) -> ModelRequest {
    let inserted = paper_text(doc, options.token_budget);
    let prompt = PLANNING_TEMPLATE.replacen(PAPER_PLACEHOLDER, &inserted, 1);
    let mut request = ModelRequest::new(Role::Planner, options.model.clone(), prompt).with_sampling(options.sampling.clone());
    if options.attach_figures {
        for (i, figure) in doc.figures.iter().enumerate() {
            if let Some(image) = &figure.image {
                let label = figure.caption.clone().unwrap_or_else(|| format!("figure-{}", i + 1));
                request = request.with_image(ImageAttachment::new(label, image.media_type.clone(), image.data.clone()));
            }
        }
    }
    request
}

fn paper_text(doc: &PaperDocument, budget: usize) -> String {
    // Parts in document order: front matter, sections, then captions.
    let mut parts: Vec<(u8, String)> = Vec::new();
    if !doc.front_matter.trim().is_empty() {
        parts.push((2, doc.front_matter.trim().to_string()));
    }
    for section in &doc.sections {
        let rank = match section.kind() {
            SectionKind::Abstract => 0,
            SectionKind::Method => 1,
            SectionKind::Other => 2,
        };
        let body = section.body.trim();
        let text = if body.is_empty() { format!("## {}", section.heading) } else { format!("## {}\n{}", section.heading, body) };
        parts.push((rank, text));
    }
    let captions: Vec<&str> = doc.figures.iter().filter_map(|f| f.caption.as_deref()).collect();
    if !captions.is_empty() {
        let mut text = String::from("Figure captions:");
        for c in captions {
            text.push_str("\n- ");
            text.push_str(c);
        }
        parts.push((3, text));
    }

    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by_key(|&i| (parts[i].0, i));
    let mut kept: Vec<Option<String>> = vec![None; parts.len()];
    let mut remaining = budget;
    let mut cut = false;
    for i in order {
        let text = &parts[i].1;
        let tokens = count_tokens(text);
        if tokens <= remaining {
            remaining -= tokens;
            kept[i] = Some(text.clone());
        } else {
            cut = true;
            if remaining > 0 {
                let head = truncate_to_tokens(text, remaining).trim_end();
                if !head.is_empty() {
                    kept[i] = Some(head.to_string());
                }
            }
            remaining = 0;
        }
    }

    let mut out = format!("Title: {}", doc.title.trim());
    for part in kept.into_iter().flatten() {
        out.push_str("\n\n");
        out.push_str(&part);
    }
    if cut {
        out.push_str("\n\n");
        out.push_str(TRUNCATION_MARKER);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_document, Section};
    use crate::testkit::pdf::gradient_descent_paper;

    fn doc(sections: Vec<Section>) -> PaperDocument {
        PaperDocument {
            title: "A Title".into(),
            front_matter: String::new(),
            sections,
            figures: vec![],
            page_count: 1,
            digest: "d".into(),
        }
    }

    fn section(h: &str, b: &str) -> Section {
        Section { heading: h.into(), body: b.into() }
    }

    #[test]
    fn template_has_one_placeholder() {
        assert_eq!(PLANNING_TEMPLATE.matches(PAPER_PLACEHOLDER).count(), 1);
    }

    #[test]
    fn empty_sections_give_template_and_title() {
        let req = build_planning_prompt(&doc(vec![]), &PlanningPromptOptions::default());
        assert_eq!(req.prompt, PLANNING_TEMPLATE.replace(PAPER_PLACEHOLDER, "Title: A Title"));
        assert_eq!(req.role, Role::Planner);
    }

    #[test]
    fn rendered_length_is_template_plus_inserted() {
        let d = parse_document(&gradient_descent_paper()).unwrap();
        let req = build_planning_prompt(&d, &PlanningPromptOptions::default());
        // Independent reconstruction of the inserted text.
        let mut inserted = format!("Title: {}\n\n{}", d.title, d.front_matter);
        for s in &d.sections {
            inserted.push_str(&format!("\n\n## {}\n{}", s.heading, s.body));
        }
        inserted.push_str("\n\nFigure captions:\n- Figure 1: Optimizer trajectories on a saddle surface.");
        assert!(req.prompt.contains(&inserted));
        assert_eq!(req.prompt.len(), PLANNING_TEMPLATE.len() - PAPER_PLACEHOLDER.len() + inserted.len());
    }

    #[test]
    fn small_budget_keeps_title_and_marks_truncation() {
        let d = doc(vec![section("Abstract", &"word ".repeat(50)), section("Method", "m")]);
        let opts = PlanningPromptOptions { token_budget: 5, ..Default::default() };
        let req = build_planning_prompt(&d, &opts);
        assert!(req.prompt.contains("Title: A Title"));
        assert!(req.prompt.contains(TRUNCATION_MARKER));
        assert!(!req.prompt.contains("## Method"));
    }

    #[test]
    fn priority_prefers_method_over_other_sections() {
        let d = doc(vec![
            section("Introduction", "intro text here"),
            section("Abstract", "short"),
            section("Proposed Method", "the method"),
        ]);
        // "## Abstract\nshort" = 4 tokens, "## Proposed Method\nthe method" = 6.
        let opts = PlanningPromptOptions { token_budget: 10, ..Default::default() };
        let req = build_planning_prompt(&d, &opts);
        assert!(req.prompt.contains("## Abstract\nshort"));
        assert!(req.prompt.contains("## Proposed Method\nthe method"));
        assert!(!req.prompt.contains("intro text"));
        assert!(req.prompt.contains(TRUNCATION_MARKER));
        let a = req.prompt.find("## Abstract").unwrap();
        let m = req.prompt.find("## Proposed").unwrap();
        assert!(a < m);
    }

    #[test]
    fn construction_is_pure() {
        let d = parse_document(&gradient_descent_paper()).unwrap();
        let opts = PlanningPromptOptions { attach_figures: true, ..Default::default() };
        let a = build_planning_prompt(&d, &opts);
        let b = build_planning_prompt(&d, &opts);
        assert_eq!(a, b);
        assert_eq!(a.images.len(), 1);
    }
}
