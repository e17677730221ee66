//! Declarative interaction attributes understood by the raster engine.
//!
//! `data-click` (and `data-change` on form controls) holds `;`-separated ops:
//!
//! | op                  | effect                                              |
//! |---------------------|-----------------------------------------------------|
//! | `inc:ID[:STEP]`     | add STEP (default 1) to the number shown in ID      |
//! | `dec:ID[:STEP]`     | subtract STEP                                       |
//! | `set:ID:TEXT`       | replace ID's text                                   |
//! | `append:ID:TEXT`    | append to ID's text                                 |
//! | `toggle:ID`         | flip ID's `hidden` attribute                        |
//! | `show:ID`           | unhide ID and hide its `data-view` siblings         |
//!
//! `data-bind="ID"` on an input writes the input's value into ID after every
//! change. `data-nav="V"` on a clickable element activates the sibling
//! group member carrying `data-view="V"`. `data-drag` marks a drag surface whose marker follows drags and
//! whose `data-change` ops run after each drag. `<meter>` and `<progress>`
//! paint a bar sized by their number, so ops that target them change a large
//! area of the frame.

use super::dom::Dom;

#[derive(Debug, Clone, PartialEq)]
pub enum ClickOp {
    Inc { target: String, step: f64 },
    Dec { target: String, step: f64 },
    Set { target: String, text: String },
    Append { target: String, text: String },
    Toggle { target: String },
    Show { target: String },
}

impl ClickOp {
    pub fn target(&self) -> &str {
        match self {
            ClickOp::Inc { target, .. }
            | ClickOp::Dec { target, .. }
            | ClickOp::Set { target, .. }
            | ClickOp::Append { target, .. }
            | ClickOp::Toggle { target }
            | ClickOp::Show { target } => target,
        }
    }
}

pub fn parse_ops(spec: &str) -> Result<Vec<ClickOp>, String> {
    let mut out = Vec::new();
    for raw in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let mut parts = raw.splitn(3, ':');
        let op = parts.next().unwrap_or_default().trim();
        let target = parts.next().map(str::trim).filter(|t| !t.is_empty()).ok_or_else(|| format!("op {raw:?} has no target"))?;
        let arg = parts.next();
        let target = target.to_string();
        let step = |arg: Option<&str>| -> Result<f64, String> {
            arg.map_or(Ok(1.0), |s| s.trim().parse().map_err(|_| format!("op {raw:?} has a non-numeric step")))
        };
        out.push(match op {
            "inc" => ClickOp::Inc { target, step: step(arg)? },
            "dec" => ClickOp::Dec { target, step: step(arg)? },
            "set" => ClickOp::Set { target, text: arg.unwrap_or_default().to_string() },
            "append" => ClickOp::Append { target, text: arg.unwrap_or_default().to_string() },
            "toggle" => ClickOp::Toggle { target },
            "show" => ClickOp::Show { target },
            other => return Err(format!("unknown op {other:?} in {raw:?}")),
        });
    }
    Ok(out)
}

pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn leading_number(text: &str) -> f64 {
    text.trim().parse().unwrap_or(0.0)
}

/// Applies ops whose targets exist; missing targets are skipped.
pub fn apply_ops(dom: &mut Dom, ops: &[ClickOp]) {
    for op in ops {
        let Some(target) = dom.by_id(op.target()) else { continue };
        match op {
            ClickOp::Inc { step, .. } | ClickOp::Dec { step, .. } => {
                let sign = if matches!(op, ClickOp::Inc { .. }) { 1.0 } else { -1.0 };
                let v = leading_number(&dom.text_content(target)) + sign * step;
                dom.set_text(target, format_number(v));
            }
            ClickOp::Set { text, .. } => dom.set_text(target, text.clone()),
            ClickOp::Append { text, .. } => {
                let cur = dom.text_content(target);
                dom.set_text(target, format!("{cur}{text}"));
            }
            ClickOp::Toggle { .. } => {
                if dom.has_attr(target, "hidden") {
                    dom.remove_attr(target, "hidden");
                } else {
                    dom.set_attr(target, "hidden", "");
                }
            }
            ClickOp::Show { .. } => {
                if let Some(parent) = dom.parent(target) {
                    let siblings: Vec<usize> = dom.children(parent).to_vec();
                    for s in siblings {
                        if s != target && dom.has_attr(s, "data-view") {
                            dom.set_attr(s, "hidden", "");
                        }
                    }
                }
                dom.remove_attr(target, "hidden");
            }
        }
    }
}

/// Activates the `data-view` element named `view`: it is unhidden and its
/// `data-view` siblings are hidden. Returns whether such an element exists.
pub fn show_view(dom: &mut Dom, view: &str) -> bool {
    let Some(target) = dom.elements().find(|&id| dom.attr(id, "data-view") == Some(view)) else {
        return false;
    };
    if let Some(parent) = dom.parent(target) {
        let siblings: Vec<usize> = dom.children(parent).to_vec();
        for s in siblings {
            if s != target && dom.has_attr(s, "data-view") {
                dom.set_attr(s, "hidden", "");
            }
        }
    }
    dom.remove_attr(target, "hidden");
    true
}

/// Every op target and `data-bind` reference that names no element.
pub fn dangling_references(dom: &Dom) -> Vec<String> {
    let mut out = Vec::new();
    for id in dom.elements() {
        for attr in ["data-click", "data-change"] {
            if let Some(spec) = dom.attr(id, attr) {
                match parse_ops(spec) {
                    Ok(ops) => out.extend(
                        ops.iter()
                            .filter(|op| dom.by_id(op.target()).is_none())
                            .map(|op| format!("{attr}=\"{spec}\": no element with id {:?}", op.target())),
                    ),
                    Err(e) => out.push(format!("{attr}: {e}")),
                }
            }
        }
        if let Some(nav) = dom.attr(id, "data-nav") {
            if !dom.elements().any(|v| dom.attr(v, "data-view") == Some(nav)) {
                out.push(format!("data-nav=\"{nav}\": no element with data-view={nav:?}"));
            }
        }
        if let Some(bind) = dom.attr(id, "data-bind") {
            if dom.by_id(bind).is_none() {
                out.push(format!("data-bind=\"{bind}\": no element with that id"));
            }
        }
    }
    out
}
