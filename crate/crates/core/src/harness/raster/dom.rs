//! A small mutable DOM built from the html5ever parse tree.

use std::collections::BTreeMap;

use scraper::node::Node as ParsedNode;
use scraper::Html;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeData {
    Element { tag: String, attrs: BTreeMap<String, String> },
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub data: NodeData,
}

/// Node 0 is the document root, tagged `#document`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dom {
    nodes: Vec<Node>,
}

const HIDDEN_TAGS: &[&str] = &["head", "script", "style", "template", "title", "meta", "link", "noscript"];

impl Dom {
    pub fn parse(html: &str) -> Self {
        let parsed = Html::parse_document(html);
        let mut dom = Dom {
            nodes: vec![Node {
                parent: None,
                children: Vec::new(),
                data: NodeData::Element { tag: "#document".into(), attrs: BTreeMap::new() },
            }],
        };
        for child in parsed.tree.root().children() {
            dom.import(child, 0);
        }
        dom
    }

    fn import(&mut self, node: ego_tree::NodeRef<'_, ParsedNode>, parent: usize) {
        let data = match node.value() {
            ParsedNode::Element(e) => NodeData::Element {
                tag: e.name().to_ascii_lowercase(),
                attrs: e.attrs().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            },
            ParsedNode::Text(t) => NodeData::Text(t.to_string()),
            _ => return,
        };
        let id = self.push(parent, data);
        for child in node.children() {
            self.import(child, id);
        }
    }

    fn push(&mut self, parent: usize, data: NodeData) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { parent: Some(parent), children: Vec::new(), data });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn tag(&self, id: usize) -> Option<&str> {
        match &self.nodes[id].data {
            NodeData::Element { tag, .. } => Some(tag),
            NodeData::Text(_) => None,
        }
    }

    pub fn attr(&self, id: usize, name: &str) -> Option<&str> {
        match &self.nodes[id].data {
            NodeData::Element { attrs, .. } => attrs.get(name).map(String::as_str),
            NodeData::Text(_) => None,
        }
    }

    pub fn has_attr(&self, id: usize, name: &str) -> bool {
        self.attr(id, name).is_some()
    }

    pub fn set_attr(&mut self, id: usize, name: &str, value: impl Into<String>) {
        if let NodeData::Element { attrs, .. } = &mut self.nodes[id].data {
            attrs.insert(name.to_string(), value.into());
        }
    }

    pub fn remove_attr(&mut self, id: usize, name: &str) {
        if let NodeData::Element { attrs, .. } = &mut self.nodes[id].data {
            attrs.remove(name);
        }
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent
    }

    /// Element ids in document order.
    pub fn elements(&self) -> impl Iterator<Item = usize> + '_ {
        let mut stack = vec![0];
        std::iter::from_fn(move || {
            while let Some(id) = stack.pop() {
                stack.extend(self.nodes[id].children.iter().rev());
                if id != 0 && self.tag(id).is_some() {
                    return Some(id);
                }
            }
            None
        })
    }

    /// Descendant elements of `root` in document order.
    pub fn elements_under(&self, root: usize) -> impl Iterator<Item = usize> + '_ {
        let mut stack: Vec<usize> = self.nodes[root].children.iter().rev().copied().collect();
        std::iter::from_fn(move || {
            while let Some(id) = stack.pop() {
                stack.extend(self.nodes[id].children.iter().rev());
                if self.tag(id).is_some() {
                    return Some(id);
                }
            }
            None
        })
    }

    pub fn find_tag(&self, tag: &str) -> Option<usize> {
        self.elements().find(|&id| self.tag(id) == Some(tag))
    }

    pub fn body(&self) -> Option<usize> {
        self.find_tag("body")
    }

    pub fn by_id(&self, html_id: &str) -> Option<usize> {
        self.elements().find(|&id| self.attr(id, "id") == Some(html_id))
    }

    pub fn text_content(&self, id: usize) -> String {
        let mut out = String::new();
        self.collect_text(id, &mut out);
        out
    }

    fn collect_text(&self, id: usize, out: &mut String) {
        match &self.nodes[id].data {
            NodeData::Text(t) => out.push_str(t),
            NodeData::Element { tag, .. } => {
                if HIDDEN_TAGS.contains(&tag.as_str()) {
                    return;
                }
                for &c in &self.nodes[id].children {
                    self.collect_text(c, out);
                }
            }
        }
    }

    /// Replaces all children of `id` with one text node.
    pub fn set_text(&mut self, id: usize, text: impl Into<String>) {
        for c in std::mem::take(&mut self.nodes[id].children) {
            self.nodes[c].parent = None;
        }
        self.push(id, NodeData::Text(text.into()));
    }

    fn style_of(&self, id: usize, property: &str) -> Option<String> {
        let style = self.attr(id, "style")?;
        style.split(';').rev().find_map(|decl| {
            let (k, v) = decl.split_once(':')?;
            (k.trim().eq_ignore_ascii_case(property)).then(|| v.trim().to_ascii_lowercase())
        })
    }

    pub fn style(&self, id: usize, property: &str) -> Option<String> {
        self.style_of(id, property)
    }

    /// Hidden by the `hidden` attribute, `display: none`, or a non-rendered
    /// tag on the element itself.
    pub fn hidden_self(&self, id: usize) -> bool {
        match self.tag(id) {
            None => false,
            Some(tag) => {
                HIDDEN_TAGS.contains(&tag)
                    || self.has_attr(id, "hidden")
                    || self.style_of(id, "display").as_deref() == Some("none")
                    || (tag == "input" && self.attr(id, "type").is_some_and(|t| t.eq_ignore_ascii_case("hidden")))
            }
        }
    }

    pub fn is_visible(&self, id: usize) -> bool {
        let mut cur = Some(id);
        while let Some(n) = cur {
            if self.hidden_self(n) {
                return false;
            }
            cur = self.parent(n);
        }
        // Detached nodes have no path to the root.
        self.attached(id)
    }

    fn attached(&self, id: usize) -> bool {
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            cur = p;
        }
        cur == 0
    }

    /// `#id` when the id is unique and a plain CSS identifier, otherwise a
    /// `tag:nth-of-type(n)` chain from `body`.
    pub fn locator(&self, id: usize) -> String {
        if let Some(html_id) = self.attr(id, "id") {
            let plain = html_id.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && html_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if plain && self.elements().filter(|&e| self.attr(e, "id") == Some(html_id)).count() == 1 {
                return format!("#{html_id}");
            }
        }
        let mut parts = Vec::new();
        let mut cur = id;
        loop {
            let tag = self.tag(cur).unwrap_or("#text");
            if tag == "body" || tag == "html" {
                parts.push(tag.to_string());
                break;
            }
            let Some(parent) = self.parent(cur) else { break };
            let nth = self.children(parent).iter().take_while(|&&c| c != cur).filter(|&&c| self.tag(c) == Some(tag)).count() + 1;
            parts.push(format!("{tag}:nth-of-type({nth})"));
            cur = parent;
        }
        parts.reverse();
        parts.join(" > ")
    }

    /// Resolves a locator produced by [`Dom::locator`].
    pub fn resolve(&self, locator: &str) -> Option<usize> {
        if let Some(html_id) = locator.strip_prefix('#') {
            return self.by_id(html_id).filter(|&id| self.attached(id));
        }
        let mut parts = locator.split('>').map(str::trim);
        let mut cur = self.find_tag(parts.next()?)?;
        for part in parts {
            let (tag, nth) = match part.split_once(":nth-of-type(") {
                Some((tag, rest)) => (tag, rest.strip_suffix(')')?.parse::<usize>().ok()?),
                None => (part, 1),
            };
            cur = *self.children(cur).iter().filter(|&&c| self.tag(c) == Some(tag)).nth(nth.checked_sub(1)?)?;
        }
        Some(cur)
    }

    pub fn ancestor_attr(&self, id: usize, name: &str) -> Option<&str> {
        let mut cur = Some(id);
        while let Some(n) = cur {
            if let Some(v) = self.attr(n, name) {
                return Some(v);
            }
            cur = self.parent(n);
        }
        None
    }

    pub fn inside_tag(&self, id: usize, tag: &str) -> bool {
        let mut cur = self.parent(id);
        while let Some(n) = cur {
            if self.tag(n) == Some(tag) {
                return true;
            }
            cur = self.parent(n);
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAGE: &str = r#"<!doctype html><html><head><title>t</title></head><body>
        <div><p>a</p><button id="go">Go</button><button>Two</button></div>
        <div hidden><span id="dup">x</span></div><span id="dup">y</span>
        <script>var x = 1;</script></body></html>"#;

    #[test]
    fn locators_round_trip() {
        let dom = Dom::parse(PAGE);
        for id in dom.elements() {
            if dom.tag(id).is_some_and(|t| t != "html" && t != "head" && t != "title") {
                assert_eq!(dom.resolve(&dom.locator(id)), Some(id), "{}", dom.locator(id));
            }
        }
        let go = dom.by_id("go").unwrap();
        assert_eq!(dom.locator(go), "#go");
        let two = dom.resolve("body > div:nth-of-type(1) > button:nth-of-type(2)").unwrap();
        assert_eq!(dom.text_content(two), "Two");
    }

    #[test]
    fn duplicate_ids_fall_back_to_paths() {
        let dom = Dom::parse(PAGE);
        let dups: Vec<_> = dom.elements().filter(|&e| dom.attr(e, "id") == Some("dup")).collect();
        assert_eq!(dups.len(), 2);
        assert!(dom.locator(dups[1]).starts_with("body > "));
    }

    #[test]
    fn visibility_and_text() {
        let mut dom = Dom::parse(PAGE);
        let dups: Vec<_> = dom.elements().filter(|&e| dom.attr(e, "id") == Some("dup")).collect();
        assert!(!dom.is_visible(dups[0]));
        assert!(dom.is_visible(dups[1]));
        let go = dom.by_id("go").unwrap();
        dom.set_text(go, "Went");
        assert_eq!(dom.text_content(go), "Went");
        assert!(!dom.text_content(dom.body().unwrap()).contains("var x"));
    }
}
