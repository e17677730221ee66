//! PDF text and figure extraction.
//!
//! Text is read from content streams in stream order, one line per text
//! positioning step. Font size (scaled by the text matrix) separates the
//! title and headings from body text: the body size is the character-weighted
//! most common size, and headings are short lines at least 15% larger.

use std::collections::{BTreeMap, HashMap};
use std::io::Cursor;

use lopdf::content::Content;
use lopdf::{Document, Encoding, Object, ObjectId};
use regex::Regex;

use super::{Figure, FigureImage, IngestError, PaperDocument, Section};
use crate::digest::sha256_hex;

const HEADING_RATIO: f64 = 1.15;
const MAX_HEADING_CHARS: usize = 120;

#[derive(Debug, Clone)]
enum LineKind {
    Text(String),
    Image(Option<FigureImage>),
}

#[derive(Debug, Clone)]
struct Line {
    page: u32,
    size: f64,
    kind: LineKind,
}

pub fn parse_document(bytes: &[u8]) -> Result<PaperDocument, IngestError> {
    if bytes.is_empty() {
        return Err(IngestError::UnreadableDocument("empty input".into()));
    }
    let doc = Document::load_mem(bytes).map_err(|e| IngestError::UnreadableDocument(e.to_string()))?;
    if doc.is_encrypted() {
        return Err(IngestError::EncryptedDocument);
    }
    let pages = doc.get_pages();
    if pages.is_empty() {
        return Err(IngestError::UnreadableDocument("document has no pages".into()));
    }
    let mut lines = Vec::new();
    for (&number, &page_id) in &pages {
        extract_page(&doc, number, page_id, &mut lines)
            .map_err(|e| IngestError::UnreadableDocument(format!("page {number}: {e}")))?;
    }
    Ok(assemble(lines, pages.len() as u32, sha256_hex(bytes)))
}

fn extract_page(doc: &Document, number: u32, page_id: ObjectId, out: &mut Vec<Line>) -> lopdf::Result<()> {
    let fonts = doc.get_page_fonts(page_id).unwrap_or_default();
    let encodings: HashMap<Vec<u8>, Encoding> = fonts
        .into_iter()
        .filter_map(|(name, font)| font.get_font_encoding(doc).ok().map(|e| (name, e)))
        .collect();
    let images = page_images(doc, page_id);
    let content = Content::decode(&doc.get_page_content(page_id)?)?;

    let mut font: Option<Vec<u8>> = None;
    let mut font_size = 0.0_f64;
    let mut matrix_scale = 1.0_f64;
    let mut current = String::new();
    let mut current_size = 0.0_f64;

    let flush = |current: &mut String, size: f64, out: &mut Vec<Line>| {
        let text = current.split_whitespace().collect::<Vec<_>>().join(" ");
        if !text.is_empty() {
            out.push(Line { page: number, size, kind: LineKind::Text(text) });
        }
        current.clear();
    };

    for op in &content.operations {
        let operands = &op.operands;
        match op.operator.as_str() {
            "BT" => {
                flush(&mut current, current_size, out);
                matrix_scale = 1.0;
            }
            "ET" => flush(&mut current, current_size, out),
            "Tf" => {
                font = operands.first().and_then(|o| o.as_name().ok()).map(<[u8]>::to_vec);
                font_size = operands.get(1).and_then(number_of).unwrap_or(font_size);
            }
            "Tm" => {
                flush(&mut current, current_size, out);
                let b = operands.get(1).and_then(number_of).unwrap_or(0.0);
                let d = operands.get(3).and_then(number_of).unwrap_or(1.0);
                matrix_scale = (b * b + d * d).sqrt();
            }
            "Td" | "TD" => {
                let ty = operands.get(1).and_then(number_of).unwrap_or(0.0);
                if ty != 0.0 {
                    flush(&mut current, current_size, out);
                }
            }
            "T*" => flush(&mut current, current_size, out),
            "Tj" | "TJ" | "'" | "\"" => {
                if matches!(op.operator.as_str(), "'" | "\"") {
                    flush(&mut current, current_size, out);
                }
                if current.is_empty() {
                    current_size = font_size * matrix_scale;
                }
                let encoding = font.as_ref().and_then(|f| encodings.get(f));
                for operand in operands {
                    append_text(&mut current, encoding, operand);
                }
            }
            "Do" => {
                if let Some(name) = operands.first().and_then(|o| o.as_name().ok()) {
                    if let Some(image) = images.get(name) {
                        flush(&mut current, current_size, out);
                        out.push(Line { page: number, size: 0.0, kind: LineKind::Image(image.clone()) });
                    }
                }
            }
            _ => {}
        }
    }
    flush(&mut current, current_size, out);
    Ok(())
}

fn number_of(o: &Object) -> Option<f64> {
    match o {
        Object::Integer(i) => Some(*i as f64),
        Object::Real(r) => Some(*r as f64),
        _ => None,
    }
}

fn append_text(out: &mut String, encoding: Option<&Encoding>, operand: &Object) {
    match operand {
        Object::String(bytes, _) => {
            let decoded = encoding
                .and_then(|e| Document::decode_text(e, bytes).ok())
                .unwrap_or_else(|| String::from_utf8_lossy(bytes).into_owned());
            out.push_str(&decoded);
        }
        Object::Array(items) => {
            for item in items {
                match item {
                    Object::Integer(_) | Object::Real(_) => {
                        if number_of(item).is_some_and(|n| n < -200.0) {
                            out.push(' ');
                        }
                    }
                    other => append_text(out, encoding, other),
                }
            }
        }
        _ => {}
    }
}

/// Image XObjects on a page by resource name. Pixel data is kept when it is
/// JPEG or 8-bit RGB/gray that can be re-encoded as PNG.
fn page_images(doc: &Document, page_id: ObjectId) -> HashMap<Vec<u8>, Option<FigureImage>> {
    let mut out = HashMap::new();
    let Ok(page) = doc.get_dictionary(page_id) else { return out };
    let Ok(resources) = doc.get_dict_in_dict(page, b"Resources") else { return out };
    let Ok(xobjects) = doc.get_dict_in_dict(resources, b"XObject") else { return out };
    for (name, value) in xobjects.iter() {
        let Ok(id) = value.as_reference() else { continue };
        let Ok(stream) = doc.get_object(id).and_then(Object::as_stream) else { continue };
        let dict = &stream.dict;
        if dict.get(b"Subtype").and_then(Object::as_name).ok() != Some(b"Image".as_slice()) {
            continue;
        }
        let width = dict.get(b"Width").ok().and_then(number_of).unwrap_or(0.0) as u32;
        let height = dict.get(b"Height").ok().and_then(number_of).unwrap_or(0.0) as u32;
        let filters: Vec<Vec<u8>> = match dict.get(b"Filter") {
            Ok(Object::Name(n)) => vec![n.clone()],
            Ok(Object::Array(a)) => a.iter().filter_map(|o| o.as_name().ok().map(<[u8]>::to_vec)).collect(),
            _ => Vec::new(),
        };
        let color = dict.get(b"ColorSpace").and_then(Object::as_name).ok().map(<[u8]>::to_vec);
        let bpc = dict.get(b"BitsPerComponent").ok().and_then(number_of).unwrap_or(8.0) as u32;
        let image = if filters.iter().any(|f| f == b"DCTDecode") {
            Some(("image/jpeg".to_string(), stream.content.clone()))
        } else {
            let raw = if filters.is_empty() { Some(stream.content.clone()) } else { stream.decompressed_content().ok() };
            raw.and_then(|raw| to_png(&raw, width, height, color.as_deref(), bpc))
                .map(|png| ("image/png".to_string(), png))
        };
        let figure = image.map(|(media_type, data)| FigureImage {
            media_type,
            width,
            height,
            digest: sha256_hex(&data),
            data,
        });
        out.insert(name.clone(), figure);
    }
    out
}

fn to_png(raw: &[u8], width: u32, height: u32, color: Option<&[u8]>, bpc: u32) -> Option<Vec<u8>> {
    if bpc != 8 || width == 0 || height == 0 {
        return None;
    }
    let pixels = (width as usize) * (height as usize);
    let dynamic = match color {
        Some(b"DeviceRGB") if raw.len() >= pixels * 3 => {
            image::DynamicImage::ImageRgb8(image::RgbImage::from_raw(width, height, raw[..pixels * 3].to_vec())?)
        }
        Some(b"DeviceGray") if raw.len() >= pixels => {
            image::DynamicImage::ImageLuma8(image::GrayImage::from_raw(width, height, raw[..pixels].to_vec())?)
        }
        _ => return None,
    };
    let mut png = Vec::new();
    dynamic.write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png).ok()?;
    Some(png)
}

fn assemble(lines: Vec<Line>, page_count: u32, digest: String) -> PaperDocument {
    let caption_re = Regex::new(r"^(?i)(figure|fig\.)\s*\d+").expect("valid regex");
    let mut weights: BTreeMap<i64, usize> = BTreeMap::new();
    for line in &lines {
        if let LineKind::Text(t) = &line.kind {
            *weights.entry((line.size * 10.0).round() as i64).or_default() += t.chars().count();
        }
    }
    let body_size = weights
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(s, _)| *s as f64 / 10.0)
        .unwrap_or(0.0);

    // Title: the leading run of largest-size lines on the first page.
    let first_page = lines.iter().filter(|l| l.page == 1);
    let title_size = first_page
        .filter(|l| matches!(l.kind, LineKind::Text(_)))
        .map(|l| l.size)
        .fold(0.0_f64, f64::max);
    let mut title_lines = Vec::new();
    let mut idx = 0;
    if title_size > body_size {
        while idx < lines.len() && lines[idx].page == 1 {
            match &lines[idx].kind {
                LineKind::Text(t) if (lines[idx].size - title_size).abs() < 0.05 => {
                    title_lines.push(t.clone());
                    idx += 1;
                }
                LineKind::Text(_) if title_lines.is_empty() => idx += 1,
                _ => break,
            }
        }
    }
    let preamble_end = idx;
    let mut title = title_lines.join(" ");
    if title.is_empty() {
        if let Some(LineKind::Text(t)) = lines.first().map(|l| &l.kind) {
            title = t.clone();
            idx = 1;
        }
    } else {
        idx = preamble_end;
    }

    let is_heading = |line: &Line, text: &str| {
        line.size >= body_size * HEADING_RATIO && text.chars().count() <= MAX_HEADING_CHARS && !caption_re.is_match(text)
    };

    let mut front = Vec::new();
    let mut sections: Vec<Section> = Vec::new();
    let mut figures: Vec<Figure> = Vec::new();
    let mut open_image: Option<usize> = None;
    for line in &lines[idx..] {
        match &line.kind {
            LineKind::Image(image) => {
                figures.push(Figure { page: line.page, caption: None, image: image.clone() });
                open_image = Some(figures.len() - 1);
            }
            LineKind::Text(text) => {
                if caption_re.is_match(text) {
                    match open_image.take() {
                        Some(i) if figures[i].page == line.page => figures[i].caption = Some(text.clone()),
                        _ => figures.push(Figure { page: line.page, caption: Some(text.clone()), image: None }),
                    }
                }
                if is_heading(line, text) {
                    sections.push(Section { heading: text.clone(), body: String::new() });
                    continue;
                }
                match sections.last_mut() {
                    Some(section) => {
                        if !section.body.is_empty() {
                            section.body.push('\n');
                        }
                        section.body.push_str(text);
                    }
                    None => front.push(text.clone()),
                }
            }
        }
    }

    PaperDocument {
        title,
        front_matter: front.join("\n"),
        sections,
        figures,
        page_count,
        digest,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::pdf::{gradient_descent_paper, SyntheticPdf};

    #[test]
    fn garbage_and_empty_inputs_are_unreadable() {
        assert!(matches!(parse_document(b""), Err(IngestError::UnreadableDocument(_))));
        assert!(matches!(parse_document(b"not a pdf at all"), Err(IngestError::UnreadableDocument(_))));
    }

    #[test]
    fn zero_page_document_is_unreadable() {
        let bytes = SyntheticPdf::new().build();
        assert!(matches!(parse_document(&bytes), Err(IngestError::UnreadableDocument(_))));
    }

    #[test]
    fn encrypted_document_is_rejected() {
        let bytes = SyntheticPdf::new().title("Secret").encrypted().build();
        assert_eq!(parse_document(&bytes), Err(IngestError::EncryptedDocument));
    }

    /// Three pages, two headings. The page count and heading text are checked
    /// against lopdf's own page tree and plain-text extractor.
    #[test]
    fn three_page_two_heading_fixture() {
        let bytes = SyntheticPdf::new()
            .title("Synthetic Study")
            .body("An author")
            .heading("Introduction")
            .body("First paragraph.")
            .page()
            .body("Continued on page two.")
            .page()
            .heading("Results")
            .body("Numbers went up.")
            .build();
        let reference = Document::load_mem(&bytes).unwrap();
        let reference_pages = reference.get_pages().len() as u32;
        let reference_text = reference.extract_text(&[1, 2, 3]).unwrap();

        let doc = parse_document(&bytes).unwrap();
        assert_eq!(doc.page_count, reference_pages);
        assert_eq!(doc.page_count, 3);
        assert_eq!(doc.sections.len(), 2);
        for s in &doc.sections {
            assert!(reference_text.contains(&s.heading));
        }
        assert_eq!(doc.title, "Synthetic Study");
        assert_eq!(doc.front_matter, "An author");
        assert_eq!(doc.sections[0].body, "First paragraph.\nContinued on page two.");
        assert_eq!(doc.sections[1].body, "Numbers went up.");
    }

    #[test]
    fn digest_is_stable() {
        let bytes = gradient_descent_paper();
        let a = parse_document(&bytes).unwrap();
        let b = parse_document(&bytes).unwrap();
        assert_eq!(a.digest, b.digest);
        assert_eq!(a, b);
    }

    #[test]
    fn figures_pair_with_captions() {
        let doc = parse_document(&gradient_descent_paper()).unwrap();
        assert_eq!(doc.figures.len(), 1);
        let fig = &doc.figures[0];
        assert_eq!(fig.page, 2);
        assert_eq!(fig.caption.as_deref(), Some("Figure 1: Optimizer trajectories on a saddle surface."));
        let image = fig.image.as_ref().expect("raw RGB image is re-encoded");
        assert_eq!((image.width, image.height, image.media_type.as_str()), (8, 6, "image/png"));
        let decoded = image::load_from_memory(&image.data).unwrap().to_rgb8();
        assert_eq!(decoded.get_pixel(3, 3).0, [40, 90, 200]);
        assert_eq!(
            doc.sections.iter().map(|s| s.heading.as_str()).collect::<Vec<_>>(),
            ["Abstract", "Method", "Experiments"]
        );
    }
}
