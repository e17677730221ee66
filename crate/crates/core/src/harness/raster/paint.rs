//! Single-column flow layout and painting with an 8x8 bitmap font.
//!
//! Block elements stack vertically; runs of text and inline elements wrap
//! inside the current column. A visible `<nav>` becomes a fixed left sidebar.
//! Only inline `style` declarations are honoured: `display: none`,
//! `background`, `color`, `width` and `height` in pixels.

use std::collections::HashMap;

use font8x8::{UnicodeFonts, BASIC_FONTS};
use image::{Rgb, RgbImage};

use super::dom::{Dom, NodeData};
use crate::harness::{Rect, Viewport};

pub const SIDEBAR_WIDTH: u32 = 200;
const PAD: i64 = 16;
const GLYPH: i64 = 8;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const INK: Rgb<u8> = Rgb([25, 25, 35]);
const MUTED: Rgb<u8> = Rgb([150, 150, 150]);
const BORDER: Rgb<u8> = Rgb([60, 60, 70]);
const CONTROL_FILL: Rgb<u8> = Rgb([232, 234, 240]);
const SIDEBAR_FILL: Rgb<u8> = Rgb([236, 239, 244]);
const ACCENT: Rgb<u8> = Rgb([40, 100, 210]);
const BAR: Rgb<u8> = Rgb([30, 70, 160]);

const INLINE_TAGS: &[&str] = &[
    "a", "abbr", "b", "code", "em", "i", "kbd", "label", "mark", "output", "q", "s", "samp", "small", "span", "strong",
    "sub", "sup", "u", "var",
];

pub struct Painted {
    pub image: RgbImage,
    pub boxes: HashMap<usize, Rect>,
}

pub fn paint(dom: &Dom, viewport: Viewport) -> Painted {
    let mut p = Painter {
        image: RgbImage::from_pixel(viewport.width, viewport.height, WHITE),
        boxes: HashMap::new(),
        dom,
    };
    let Some(body) = dom.body() else {
        return Painted { image: p.image, boxes: p.boxes };
    };
    let nav = dom.elements().find(|&id| dom.tag(id) == Some("nav") && dom.is_visible(id));
    let mut content_x = 0;
    if let Some(nav) = nav {
        p.fill(0, 0, SIDEBAR_WIDTH as i64, viewport.height as i64, SIDEBAR_FILL);
        p.fill(SIDEBAR_WIDTH as i64 - 1, 0, 1, viewport.height as i64, MUTED);
        let col = Column { x: 12, width: SIDEBAR_WIDTH as i64 - 24 };
        p.flow_children(nav, col, PAD, Style::default(), Some(nav));
        p.boxes.insert(nav, Rect { x: 0.0, y: 0.0, width: SIDEBAR_WIDTH as f64, height: viewport.height as f64 });
        content_x = SIDEBAR_WIDTH as i64;
    }
    let col = Column { x: content_x + PAD, width: viewport.width as i64 - content_x - 2 * PAD };
    p.flow_children(body, col, PAD, Style::default(), nav);
    Painted { image: p.image, boxes: p.boxes }
}

#[derive(Debug, Clone, Copy)]
struct Column {
    x: i64,
    width: i64,
}

#[derive(Debug, Clone, Copy)]
struct Style {
    scale: i64,
    color: Rgb<u8>,
}

impl Default for Style {
    fn default() -> Self {
        Self { scale: 2, color: INK }
    }
}

struct Painter<'a> {
    image: RgbImage,
    boxes: HashMap<usize, Rect>,
    dom: &'a Dom,
}

impl Painter<'_> {
    fn fill(&mut self, x: i64, y: i64, w: i64, h: i64, color: Rgb<u8>) {
        let (iw, ih) = (self.image.width() as i64, self.image.height() as i64);
        for yy in y.max(0)..(y + h).min(ih) {
            for xx in x.max(0)..(x + w).min(iw) {
                self.image.put_pixel(xx as u32, yy as u32, color);
            }
        }
    }

    fn border(&mut self, x: i64, y: i64, w: i64, h: i64, t: i64, color: Rgb<u8>) {
        self.fill(x, y, w, t, color);
        self.fill(x, y + h - t, w, t, color);
        self.fill(x, y, t, h, color);
        self.fill(x + w - t, y, t, h, color);
    }

    fn glyph(&mut self, x: i64, y: i64, c: char, scale: i64, color: Rgb<u8>) {
        let c = if c.is_ascii() { c } else { '?' };
        let Some(rows) = BASIC_FONTS.get(c) else { return };
        for (row, bits) in rows.iter().enumerate() {
            for col in 0..8 {
                if bits & (1 << col) != 0 {
                    self.fill(x + col * scale, y + row as i64 * scale, scale, scale, color);
                }
            }
        }
    }

    fn text_line(&mut self, x: i64, y: i64, text: &str, scale: i64, color: Rgb<u8>) {
        for (i, c) in text.chars().enumerate() {
            self.glyph(x + i as i64 * GLYPH * scale, y, c, scale, color);
        }
    }

    /// Word-wraps `text` into the column; returns the new cursor y.
    fn paragraph(&mut self, text: &str, col: Column, mut y: i64, style: Style) -> i64 {
        let per_line = (col.width / (GLYPH * style.scale)).max(1) as usize;
        let line_h = GLYPH * style.scale + 6;
        let mut line = String::new();
        for word in text.split_whitespace() {
            let mut word = word.to_string();
            while word.chars().count() > per_line {
                let head: String = word.chars().take(per_line).collect();
                if !line.is_empty() {
                    self.text_line(col.x, y, &line, style.scale, style.color);
                    y += line_h;
                    line.clear();
                }
                self.text_line(col.x, y, &head, style.scale, style.color);
                y += line_h;
                word = word.chars().skip(per_line).collect();
            }
            let needed = if line.is_empty() { word.chars().count() } else { line.chars().count() + 1 + word.chars().count() };
            if needed > per_line && !line.is_empty() {
                self.text_line(col.x, y, &line, style.scale, style.color);
                y += line_h;
                line.clear();
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&word);
        }
        if !line.is_empty() {
            self.text_line(col.x, y, &line, style.scale, style.color);
            y += line_h;
        }
        y
    }

    fn is_inline(&self, id: usize) -> bool {
        match &self.dom.node(id).data {
            NodeData::Text(_) => true,
            NodeData::Element { tag, .. } => {
                INLINE_TAGS.contains(&tag.as_str()) && !self.dom.has_attr(id, "data-click") && !self.dom.has_attr(id, "data-nav")
            }
        }
    }

    fn px(&self, id: usize, prop: &str, reference: i64) -> Option<i64> {
        let v = self.dom.style(id, prop)?;
        if let Some(pct) = v.strip_suffix('%') {
            return pct.trim().parse::<f64>().ok().map(|p| (p / 100.0 * reference as f64) as i64);
        }
        v.trim_end_matches("px").trim().parse::<f64>().ok().map(|p| p as i64)
    }

    fn attr_px(&self, id: usize, name: &str) -> Option<i64> {
        self.dom.attr(id, name)?.trim().trim_end_matches("px").parse().ok()
    }

    fn flow_children(&mut self, id: usize, col: Column, mut y: i64, style: Style, skip: Option<usize>) -> i64 {
        let children = self.dom.children(id).to_vec();
        let mut run = String::new();
        for child in children {
            if Some(child) == skip || self.dom.hidden_self(child) {
                continue;
            }
            if self.is_inline(child) {
                run.push_str(&self.dom.text_content(child));
                run.push(' ');
                continue;
            }
            if !run.trim().is_empty() {
                y = self.paragraph(&run, col, y, style);
            }
            run.clear();
            y = self.block(child, col, y, style, skip);
        }
        if !run.trim().is_empty() {
            y = self.paragraph(&run, col, y, style);
        }
        y
    }

    fn block(&mut self, id: usize, col: Column, y: i64, inherited: Style, skip: Option<usize>) -> i64 {
        let tag = self.dom.tag(id).unwrap_or_default().to_string();
        let mut style = inherited;
        if let Some(c) = self.dom.style(id, "color").and_then(|c| parse_color(&c)) {
            style.color = c;
        }
        match tag.as_str() {
            "h1" => style.scale = 3,
            "h2" | "h3" => style.scale = 2,
            _ => {}
        }
        let width = self.px(id, "width", col.width).unwrap_or(col.width).clamp(0, col.width.max(0));
        let top = y;
        let inner = Column { x: col.x, width };
        let bottom = match tag.as_str() {
            "br" => y + GLYPH * style.scale,
            "hr" => {
                self.fill(col.x, y + 4, width, 2, MUTED);
                y + 12
            }
            "button" => self.button(id, col, y, style),
            "input" => self.input(id, col, y, style),
            "select" => self.select(id, col, y, style),
            "textarea" => self.text_box(id, col, y, style, self.dom.text_content(id)),
            "canvas" | "img" | "svg" => self.surface(id, col, y),
            "meter" | "progress" => self.meter(id, col, y, width),
            _ if self.dom.has_attr(id, "data-drag") => self.surface(id, col, y),
            _ if self.dom.has_attr(id, "data-click") => self.button(id, col, y, style),
            _ => {
                let bg = self.dom.style(id, "background").or_else(|| self.dom.style(id, "background-color")).and_then(|c| parse_color(&c));
                let explicit_h = self.px(id, "height", 768);
                // Dry run to size the background, then paint over it.
                let content_bottom = if let Some(bg) = bg {
                    let snapshot = self.image.clone();
                    let end = self.flow_children(id, inner, y, style, skip);
                    self.image = snapshot;
                    let h = explicit_h.unwrap_or(0).max(end - y);
                    self.fill(col.x, y, width, h, bg);
                    self.flow_children(id, inner, y, style, skip);
                    y + h
                } else {
                    let end = self.flow_children(id, inner, y, style, skip);
                    end.max(y + explicit_h.unwrap_or(0))
                };
                content_bottom + block_gap(&tag)
            }
        };
        // Controls record their own box without the trailing margin.
        self.boxes.entry(id).or_insert(Rect { x: col.x as f64, y: top as f64, width: width as f64, height: (bottom - top).max(0) as f64 });
        bottom
    }

    fn label(&self, id: usize) -> String {
        let text = self.dom.text_content(id);
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if !text.is_empty() {
            return text;
        }
        self.dom.attr(id, "value").or_else(|| self.dom.attr(id, "aria-label")).unwrap_or_default().to_string()
    }

    fn button(&mut self, id: usize, col: Column, y: i64, style: Style) -> i64 {
        let label = self.label(id);
        let scale = 2;
        let w = ((label.chars().count() as i64) * GLYPH * scale + 24).min(col.width).max(32);
        let h = GLYPH * scale + 16;
        let disabled = self.dom.has_attr(id, "disabled");
        let fill = self
            .dom
            .style(id, "background")
            .or_else(|| self.dom.style(id, "background-color"))
            .and_then(|c| parse_color(&c))
            .unwrap_or(CONTROL_FILL);
        self.fill(col.x, y, w, h, fill);
        self.border(col.x, y, w, h, 2, if disabled { MUTED } else { BORDER });
        let color = if disabled { MUTED } else { style.color };
        let max_chars = ((w - 24) / (GLYPH * scale)).max(0) as usize;
        let shown: String = label.chars().take(max_chars).collect();
        self.text_line(col.x + 12, y + 8, &shown, scale, color);
        self.boxes.insert(id, Rect { x: col.x as f64, y: y as f64, width: w as f64, height: h as f64 });
        y + h + 8
    }

    fn input(&mut self, id: usize, col: Column, y: i64, style: Style) -> i64 {
        let ty = self.dom.attr(id, "type").unwrap_or("text").to_ascii_lowercase();
        match ty.as_str() {
            "range" => {
                let (w, h) = (240.min(col.width), 24);
                let min = attr_f64(self.dom, id, "min").unwrap_or(0.0);
                let max = attr_f64(self.dom, id, "max").unwrap_or(100.0);
                let value = attr_f64(self.dom, id, "value").unwrap_or((min + max) / 2.0);
                let frac = if max > min { ((value - min) / (max - min)).clamp(0.0, 1.0) } else { 0.0 };
                self.fill(col.x, y + h / 2 - 2, w, 4, MUTED);
                let thumb_x = col.x + ((w - 12) as f64 * frac).round() as i64;
                self.fill(thumb_x, y + 2, 12, h - 4, ACCENT);
                self.boxes.insert(id, Rect { x: col.x as f64, y: y as f64, width: w as f64, height: h as f64 });
                y + h + 8
            }
            "checkbox" | "radio" => {
                let s = 20;
                self.border(col.x, y, s, s, 2, BORDER);
                if self.dom.has_attr(id, "checked") {
                    self.fill(col.x + 5, y + 5, s - 10, s - 10, ACCENT);
                }
                self.boxes.insert(id, Rect { x: col.x as f64, y: y as f64, width: s as f64, height: s as f64 });
                y + s + 8
            }
            "button" | "submit" | "reset" => self.button(id, col, y, style),
            _ => {
                let value = self.dom.attr(id, "value").unwrap_or_default().to_string();
                self.text_box(id, col, y, style, value)
            }
        }
    }

    fn text_box(&mut self, id: usize, col: Column, y: i64, style: Style, value: String) -> i64 {
        let (w, h) = (260.min(col.width), 32);
        self.fill(col.x, y, w, h, WHITE);
        self.border(col.x, y, w, h, 2, BORDER);
        let (text, color) = if value.is_empty() {
            (self.dom.attr(id, "placeholder").unwrap_or_default().to_string(), MUTED)
        } else {
            (value, style.color)
        };
        let max_chars = ((w - 16) / (GLYPH * 2)).max(0) as usize;
        let shown: String = text.chars().take(max_chars).collect();
        self.text_line(col.x + 8, y + 8, &shown, 2, color);
        self.boxes.insert(id, Rect { x: col.x as f64, y: y as f64, width: w as f64, height: h as f64 });
        y + h + 8
    }

    fn select(&mut self, id: usize, col: Column, y: i64, style: Style) -> i64 {
        let options: Vec<usize> = self.dom.elements_under(id).filter(|&o| self.dom.tag(o) == Some("option")).collect();
        let chosen = options.iter().copied().find(|&o| self.dom.has_attr(o, "selected")).or(options.first().copied());
        let text = chosen.map(|o| self.dom.text_content(o).trim().to_string()).unwrap_or_default();
        let (w, h) = (220.min(col.width), 32);
        self.fill(col.x, y, w, h, CONTROL_FILL);
        self.border(col.x, y, w, h, 2, BORDER);
        let max_chars = ((w - 40) / (GLYPH * 2)).max(0) as usize;
        let shown: String = text.chars().take(max_chars).collect();
        self.text_line(col.x + 8, y + 8, &shown, 2, style.color);
        self.text_line(col.x + w - 24, y + 8, "v", 2, style.color);
        self.boxes.insert(id, Rect { x: col.x as f64, y: y as f64, width: w as f64, height: h as f64 });
        y + h + 8
    }

    /// A bar filled in proportion to the element's number: its text when
    /// numeric, else its `value` attribute, over `min..max` (default 0..100).
    fn meter(&mut self, id: usize, col: Column, y: i64, width: i64) -> i64 {
        let h = self.px(id, "height", 768).unwrap_or(24).max(4);
        let min = attr_f64(self.dom, id, "min").unwrap_or(0.0);
        let max = attr_f64(self.dom, id, "max").unwrap_or(100.0);
        let value = self.dom.text_content(id).trim().parse::<f64>().ok().or_else(|| attr_f64(self.dom, id, "value")).unwrap_or(min);
        let frac = if max > min { ((value - min) / (max - min)).clamp(0.0, 1.0) } else { 0.0 };
        self.border(col.x, y, width, h, 2, BORDER);
        let fill = self.dom.style(id, "color").and_then(|c| parse_color(&c)).unwrap_or(BAR);
        self.fill(col.x + 2, y + 2, ((width - 4) as f64 * frac).round() as i64, h - 4, fill);
        self.boxes.insert(id, Rect { x: col.x as f64, y: y as f64, width: width as f64, height: h as f64 });
        y + h + 8
    }

    fn surface(&mut self, id: usize, col: Column, y: i64) -> i64 {
        let w = self.px(id, "width", col.width).or_else(|| self.attr_px(id, "width")).unwrap_or(300).min(col.width);
        let h = self.px(id, "height", 768).or_else(|| self.attr_px(id, "height")).unwrap_or(150);
        if let Some(bg) = self.dom.style(id, "background").or_else(|| self.dom.style(id, "background-color")).and_then(|c| parse_color(&c)) {
            self.fill(col.x, y, w, h, bg);
        }
        self.border(col.x, y, w, h, 2, BORDER);
        if self.dom.has_attr(id, "data-drag") {
            let mx = attr_f64(self.dom, id, "data-x").unwrap_or(w as f64 / 2.0).round() as i64;
            let my = attr_f64(self.dom, id, "data-y").unwrap_or(h as f64 / 2.0).round() as i64;
            self.fill(col.x + mx - 6, y + my - 6, 12, 12, ACCENT);
        }
        self.boxes.insert(id, Rect { x: col.x as f64, y: y as f64, width: w as f64, height: h as f64 });
        y + h + 8
    }
}

fn block_gap(tag: &str) -> i64 {
    match tag {
        "h1" | "h2" | "h3" | "p" | "section" | "ul" | "ol" | "table" | "header" | "footer" => 10,
        "div" | "li" | "tr" => 4,
        _ => 0,
    }
}

fn attr_f64(dom: &Dom, id: usize, name: &str) -> Option<f64> {
    dom.attr(id, name)?.trim().parse().ok()
}

pub fn parse_color(v: &str) -> Option<Rgb<u8>> {
    let v = v.trim();
    if let Some(hex) = v.strip_prefix('#') {
        let digits: Vec<u8> = hex.chars().map(|c| c.to_digit(16).map(|d| d as u8)).collect::<Option<_>>()?;
        return match digits.len() {
            3 => Some(Rgb([digits[0] * 17, digits[1] * 17, digits[2] * 17])),
            6 => Some(Rgb([digits[0] * 16 + digits[1], digits[2] * 16 + digits[3], digits[4] * 16 + digits[5]])),
            _ => None,
        };
    }
    Some(match v {
        "black" => Rgb([0, 0, 0]),
        "white" => WHITE,
        "red" => Rgb([220, 40, 40]),
        "green" => Rgb([40, 160, 60]),
        "blue" => Rgb([40, 80, 220]),
        "orange" => Rgb([240, 150, 30]),
        "purple" => Rgb([130, 60, 180]),
        "gray" | "grey" => Rgb([128, 128, 128]),
        "steelblue" => Rgb([70, 130, 180]),
        "teal" => Rgb([0, 128, 128]),
        "gold" => Rgb([255, 215, 0]),
        _ => return None,
    })
}
