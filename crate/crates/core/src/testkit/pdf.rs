//! Minimal PDF writer for synthetic paper fixtures.

use lopdf::content::{Content, Operation};
use lopdf::{dictionary, Document, Object, Stream};

#[derive(Debug, Clone)]
enum Item {
    Text { size: f64, text: String },
    Image { width: u32, height: u32, rgb: [u8; 3] },
}

/// Builds a PDF page by page. Each text line is its own text object, set in
/// Helvetica at the given size, laid out top to bottom.
#[derive(Debug, Clone, Default)]
pub struct SyntheticPdf {
    pages: Vec<Vec<Item>>,
    encrypted: bool,
}

impl SyntheticPdf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn page(mut self) -> Self {
        self.pages.push(Vec::new());
        self
    }

    fn current(&mut self) -> &mut Vec<Item> {
        if self.pages.is_empty() {
            self.pages.push(Vec::new());
        }
        self.pages.last_mut().expect("at least one page")
    }

    pub fn text(mut self, size: f64, text: impl Into<String>) -> Self {
        self.current().push(Item::Text { size, text: text.into() });
        self
    }

    pub fn title(self, text: impl Into<String>) -> Self {
        self.text(20.0, text)
    }

    pub fn heading(self, text: impl Into<String>) -> Self {
        self.text(14.0, text)
    }

    pub fn body(self, text: impl Into<String>) -> Self {
        self.text(10.0, text)
    }

    /// A solid-colour raster image XObject.
    pub fn image(mut self, width: u32, height: u32, rgb: [u8; 3]) -> Self {
        self.current().push(Item::Image { width, height, rgb });
        self
    }

    /// Marks the trailer as encrypted (the content itself stays plain).
    pub fn encrypted(mut self) -> Self {
        self.encrypted = true;
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let mut doc = Document::with_version("1.5");
        let pages_id = doc.new_object_id();
        let font_id = doc.add_object(dictionary! {
            "Type" => "Font",
            "Subtype" => "Type1",
            "BaseFont" => "Helvetica",
            "Encoding" => "WinAnsiEncoding",
        });
        let mut kids = Vec::new();
        for items in &self.pages {
            let mut ops = Vec::new();
            let mut xobjects = lopdf::Dictionary::new();
            let mut y = 800.0;
            for item in items {
                match item {
                    Item::Text { size, text } => {
                        y -= size * 1.6;
                        ops.push(Operation::new("BT", vec![]));
                        ops.push(Operation::new("Tf", vec!["F1".into(), Object::Real(*size as f32)]));
                        ops.push(Operation::new("Td", vec![Object::Real(56.0), Object::Real(y as f32)]));
                        ops.push(Operation::new("Tj", vec![Object::string_literal(text.as_str())]));
                        ops.push(Operation::new("ET", vec![]));
                    }
                    Item::Image { width, height, rgb } => {
                        let name = format!("Im{}", xobjects.len() + 1);
                        let data: Vec<u8> = (0..width * height).flat_map(|_| rgb.iter().copied()).collect();
                        let image_id = doc.add_object(Stream::new(
                            dictionary! {
                                "Type" => "XObject",
                                "Subtype" => "Image",
                                "Width" => *width as i64,
                                "Height" => *height as i64,
                                "ColorSpace" => "DeviceRGB",
                                "BitsPerComponent" => 8,
                            },
                            data,
                        ));
                        xobjects.set(name.as_bytes().to_vec(), image_id);
                        y -= *height as f64;
                        ops.push(Operation::new("q", vec![]));
                        ops.push(Operation::new(
                            "cm",
                            vec![
                                Object::Real(*width as f32),
                                0.into(),
                                0.into(),
                                Object::Real(*height as f32),
                                Object::Real(56.0),
                                Object::Real(y as f32),
                            ],
                        ));
                        ops.push(Operation::new("Do", vec![Object::Name(name.into_bytes())]));
                        ops.push(Operation::new("Q", vec![]));
                    }
                }
            }
            let content = Content { operations: ops }.encode().expect("content encodes");
            let content_id = doc.add_object(Stream::new(dictionary! {}, content));
            let mut resources = dictionary! { "Font" => dictionary! { "F1" => font_id } };
            if !xobjects.is_empty() {
                resources.set("XObject", xobjects);
            }
            let page_id = doc.add_object(dictionary! {
                "Type" => "Page",
                "Parent" => pages_id,
                "Contents" => content_id,
                "Resources" => resources,
                "MediaBox" => vec![0.into(), 0.into(), 595.into(), 842.into()],
            });
            kids.push(Object::Reference(page_id));
        }
        let count = kids.len() as i64;
        doc.objects.insert(
            pages_id,
            Object::Dictionary(dictionary! { "Type" => "Pages", "Kids" => kids, "Count" => count }),
        );
        let catalog_id = doc.add_object(dictionary! { "Type" => "Catalog", "Pages" => pages_id });
        doc.trailer.set("Root", catalog_id);
        if self.encrypted {
            let enc_id = doc.add_object(dictionary! { "Filter" => "Standard", "V" => 1, "R" => 2 });
            doc.trailer.set("Encrypt", enc_id);
        }
        let mut out = Vec::new();
        doc.save_to(&mut out).expect("in-memory save");
        out
    }
}

/// The three-page gradient-descent paper used by the end-to-end fixtures.
pub fn gradient_descent_paper() -> Vec<u8> {
    SyntheticPdf::new()
        .title("Adaptive Steps on Curved Landscapes")
        .body("A. Researcher and B. Engineer")
        .heading("Abstract")
        .body("We study gradient descent with momentum and adaptive moment estimation.")
        .body("Learning rate and curvature jointly decide whether iterates converge.")
        .page()
        .heading("Method")
        .body("Plain gradient descent updates parameters against the gradient scaled by a learning rate.")
        .body("Momentum accumulates a velocity; Adam rescales steps with running moment estimates.")
        .body("We compare trajectories on bowl, saddle and Rastrigin surfaces.")
        .image(8, 6, [40, 90, 200])
        .body("Figure 1: Optimizer trajectories on a saddle surface.")
        .page()
        .heading("Experiments")
        .body("Large learning rates diverge on the bowl; Adam escapes the saddle fastest.")
        .build()
}
