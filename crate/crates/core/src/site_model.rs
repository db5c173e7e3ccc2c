//! Site models: a web application described as a directed graph of pages.
//!
//! Every page carries a set of symbolic cue tags (stand-ins for text or UI
//! elements a browser would detect) and an ordered list of outgoing
//! interactions. The position of an interaction in that list is its action
//! index, so the order in which `edge` lines appear in a document is
//! significant.
//!
//! The document format is line oriented:
//!
//! ```text
//! # comment
//! site shop
//! start homepage
//! page homepage "Home" cues: landing
//! page done "Done" terminal
//! edge homepage click(buy) -> done
//! edge homepage type("laptop", search box) -> done
//! edge homepage scroll(down) -> homepage
//! ```

use std::borrow::Borrow;
use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SiteError {
    #[error("line {line}: {reason}")]
    MalformedDocument { line: usize, reason: String },
    #[error("line {line}: duplicate page id `{id}`")]
    DuplicatePageId { id: String, line: usize },
    #[error("line {line}: edge from `{from}` targets undeclared page `{target}`")]
    DanglingTarget {
        line: usize,
        from: String,
        target: String,
    },
    #[error("start page {}", match .0 { Some(id) => format!("`{id}` is not declared"), None => "is missing".to_string() })]
    MissingStartPage(Option<String>),
    #[error("unknown page `{0}`")]
    UnknownPage(String),
}

/// Identifier of a page within a [`SiteGraph`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PageId(String);

impl PageId {
    pub fn new(id: impl Into<String>) -> Self {
        PageId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for PageId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for PageId {
    fn from(s: &str) -> Self {
        PageId(s.to_string())
    }
}

impl From<String> for PageId {
    fn from(s: String) -> Self {
        PageId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScrollDirection {
    Up,
    Down,
}

impl fmt::Display for ScrollDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScrollDirection::Up => "up",
            ScrollDirection::Down => "down",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    Click,
    TypeText,
    Scroll,
}

/// A UI interaction. Text entry and scrolling carry a payload; clicks do not.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Interaction {
    Click { element: String },
    TypeText { text: String, element: String },
    Scroll(ScrollDirection),
}

impl Interaction {
    pub fn kind(&self) -> ActionKind {
        match self {
            Interaction::Click { .. } => ActionKind::Click,
            Interaction::TypeText { .. } => ActionKind::TypeText,
            Interaction::Scroll(_) => ActionKind::Scroll,
        }
    }

    /// The element acted upon. Scrolling acts on the page itself.
    pub fn element(&self) -> Option<&str> {
        match self {
            Interaction::Click { element } | Interaction::TypeText { element, .. } => Some(element),
            Interaction::Scroll(_) => None,
        }
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interaction::Click { element } => write!(f, "click({element})"),
            Interaction::TypeText { text, element } => {
                write!(f, "type({}, {element})", quote(text))
            }
            Interaction::Scroll(dir) => write!(f, "scroll({dir})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionEdge {
    pub interaction: Interaction,
    pub target: PageId,
}

impl ActionEdge {
    pub fn new(interaction: Interaction, target: impl Into<PageId>) -> Self {
        ActionEdge {
            interaction,
            target: target.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageNode {
    pub id: PageId,
    pub title: String,
    pub cues: BTreeSet<String>,
    pub is_terminal: bool,
    pub is_defect: bool,
    pub actions: Vec<ActionEdge>,
}

impl PageNode {
    pub fn new(id: impl Into<PageId>, title: impl Into<String>) -> Self {
        PageNode {
            id: id.into(),
            title: title.into(),
            cues: BTreeSet::new(),
            is_terminal: false,
            is_defect: false,
            actions: Vec::new(),
        }
    }

    /// A non-terminal page without outgoing interactions.
    pub fn is_dead_end(&self) -> bool {
        !self.is_terminal && self.actions.is_empty()
    }
}

/// An immutable, validated page graph. Pages keep their declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteGraph {
    name: String,
    start: PageId,
    pages: IndexMap<PageId, PageNode>,
}

impl SiteGraph {
    /// Builds a graph from already-constructed pages, checking id uniqueness,
    /// the start page and every edge target.
    pub fn from_pages(
        name: impl Into<String>,
        start: impl Into<PageId>,
        pages: Vec<PageNode>,
    ) -> Result<Self, SiteError> {
        let mut map = IndexMap::with_capacity(pages.len());
        for page in pages {
            if map.contains_key(&page.id) {
                return Err(SiteError::DuplicatePageId {
                    id: page.id.to_string(),
                    line: 0,
                });
            }
            map.insert(page.id.clone(), page);
        }
        for page in map.values() {
            for edge in &page.actions {
                if !map.contains_key(&edge.target) {
                    return Err(SiteError::DanglingTarget {
                        line: 0,
                        from: page.id.to_string(),
                        target: edge.target.to_string(),
                    });
                }
            }
        }
        let start = start.into();
        if !map.contains_key(&start) {
            return Err(SiteError::MissingStartPage(Some(start.to_string())));
        }
        Ok(SiteGraph {
            name: name.into(),
            start,
            pages: map,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start(&self) -> &PageId {
        &self.start
    }

    pub fn page(&self, id: &str) -> Result<&PageNode, SiteError> {
        self.pages
            .get(id)
            .ok_or_else(|| SiteError::UnknownPage(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.pages.contains_key(id)
    }

    /// Pages in declaration order.
    pub fn pages(&self) -> impl Iterator<Item = &PageNode> {
        self.pages.values()
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    /// Outgoing interactions of `page`, indexed by action number.
    pub fn neighbors(&self, page: &str) -> Result<&[ActionEdge], SiteError> {
        self.page(page).map(|p| p.actions.as_slice())
    }

    /// Number of actions available on `page`; zero for unknown pages.
    pub fn action_count(&self, page: &str) -> usize {
        self.pages.get(page).map_or(0, |p| p.actions.len())
    }

    pub fn total_actions(&self) -> usize {
        self.pages.values().map(|p| p.actions.len()).sum()
    }

    /// Breadth-first closure over edge targets, including `from` itself.
    pub fn reachable_set(&self, from: &str) -> Result<BTreeSet<PageId>, SiteError> {
        let origin = self.page(from)?;
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(origin.id.clone());
        queue.push_back(origin);
        while let Some(page) = queue.pop_front() {
            for edge in &page.actions {
                if seen.insert(edge.target.clone()) {
                    queue.push_back(&self.pages[&edge.target]);
                }
            }
        }
        Ok(seen)
    }

    /// Renders the graph back into the line-oriented document format.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        if !self.name.is_empty() {
            out.push_str(&format!("site {}\n", self.name));
        }
        out.push_str(&format!("start {}\n", self.start));
        for page in self.pages.values() {
            out.push('\n');
            out.push_str(&format!("page {} {}", page.id, quote(&page.title)));
            if page.is_terminal {
                out.push_str(" terminal");
            }
            if page.is_defect {
                out.push_str(" defect");
            }
            if !page.cues.is_empty() {
                let cues: Vec<&str> = page.cues.iter().map(String::as_str).collect();
                out.push_str(&format!(" cues: {}", cues.join(",")));
            }
            out.push('\n');
            for edge in &page.actions {
                out.push_str(&format!(
                    "edge {} {} -> {}\n",
                    page.id, edge.interaction, edge.target
                ));
            }
        }
        out
    }
}

/// Parses a site-model document.
pub fn load_site_model(source: &str) -> Result<SiteGraph, SiteError> {
    let mut name: Option<String> = None;
    let mut start: Option<(String, usize)> = None;
    let mut pages: IndexMap<PageId, PageNode> = IndexMap::new();
    // (line, from, edge) resolved once every page is known
    let mut edges: Vec<(usize, String, ActionEdge)> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: &str| SiteError::MalformedDocument {
            line: line_no,
            reason: reason.to_string(),
        };
        let (directive, rest) = split_word(line);
        match directive {
            "site" => {
                if name.is_some() {
                    return Err(malformed("duplicate `site` directive"));
                }
                if rest.is_empty() {
                    return Err(malformed("`site` needs a name"));
                }
                name = Some(rest.to_string());
            }
            "start" => {
                if start.is_some() {
                    return Err(malformed("duplicate `start` directive"));
                }
                let (id, tail) = split_word(rest);
                if id.is_empty() || !tail.is_empty() {
                    return Err(malformed("`start` takes exactly one page id"));
                }
                start = Some((id.to_string(), line_no));
            }
            "page" => {
                let page = parse_page(rest).map_err(|r| malformed(&r))?;
                if pages.contains_key(&page.id) {
                    return Err(SiteError::DuplicatePageId {
                        id: page.id.to_string(),
                        line: line_no,
                    });
                }
                pages.insert(page.id.clone(), page);
            }
            "edge" => {
                let (from, edge) = parse_edge(rest).map_err(|r| malformed(&r))?;
                edges.push((line_no, from, edge));
            }
            other => return Err(malformed(&format!("unknown directive `{other}`"))),
        }
    }

    for (line, from, edge) in edges {
        if !pages.contains_key(edge.target.as_str()) {
            return Err(SiteError::DanglingTarget {
                line,
                from,
                target: edge.target.to_string(),
            });
        }
        match pages.get_mut(from.as_str()) {
            Some(page) => page.actions.push(edge),
            None => {
                return Err(SiteError::MalformedDocument {
                    line,
                    reason: format!("edge source `{from}` is not a declared page"),
                })
            }
        }
    }

    let start = match start {
        None => return Err(SiteError::MissingStartPage(None)),
        Some((id, _)) if !pages.contains_key(id.as_str()) => {
            return Err(SiteError::MissingStartPage(Some(id)))
        }
        Some((id, _)) => PageId(id),
    };

    Ok(SiteGraph {
        name: name.unwrap_or_default(),
        start,
        pages,
    })
}

fn split_word(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], s[i..].trim()),
        None => (s, ""),
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Reads a double-quoted string with `\"` and `\\` escapes from the start of
/// `s`, returning the contents and the remainder.
fn take_quoted(s: &str) -> Result<(String, &str), String> {
    let mut chars = s.char_indices();
    match chars.next() {
        Some((_, '"')) => {}
        _ => return Err("expected a double-quoted string".into()),
    }
    let mut out = String::new();
    let mut escaped = false;
    for (i, c) in chars {
        if escaped {
            out.push(c);
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == '"' {
            return Ok((out, &s[i + 1..]));
        } else {
            out.push(c);
        }
    }
    Err("unterminated string".into())
}

fn parse_page(rest: &str) -> Result<PageNode, String> {
    let (id, rest) = split_word(rest);
    if id.is_empty() {
        return Err("`page` needs an id".into());
    }
    let (title, mut rest) = take_quoted(rest)?;
    let mut page = PageNode::new(id, title);
    loop {
        rest = rest.trim_start();
        if rest.is_empty() {
            break;
        }
        if let Some(list) = rest.strip_prefix("cues:") {
            for tag in list.split(',').map(str::trim) {
                if tag.is_empty() || tag.contains(char::is_whitespace) {
                    return Err(format!("invalid cue tag `{tag}`"));
                }
                page.cues.insert(tag.to_string());
            }
            break;
        }
        let (flag, tail) = split_word(rest);
        match flag {
            "terminal" if !page.is_terminal => page.is_terminal = true,
            "defect" if !page.is_defect => page.is_defect = true,
            _ => return Err(format!("unexpected page attribute `{flag}`")),
        }
        rest = tail;
    }
    Ok(page)
}

fn parse_edge(rest: &str) -> Result<(String, ActionEdge), String> {
    let (from, rest) = split_word(rest);
    if from.is_empty() {
        return Err("`edge` needs a source page".into());
    }
    let (interaction, rest) = parse_interaction(rest)?;
    let rest = rest
        .trim_start()
        .strip_prefix("->")
        .ok_or("expected `->` after the interaction")?;
    let (target, tail) = split_word(rest);
    if target.is_empty() {
        return Err("missing edge target".into());
    }
    if !tail.is_empty() {
        return Err(format!("trailing input `{tail}`"));
    }
    Ok((from.to_string(), ActionEdge::new(interaction, target)))
}

fn element_name(s: &str) -> Result<(String, &str), String> {
    let close = s.find(')').ok_or("missing `)`")?;
    let element = s[..close].trim();
    if element.is_empty() {
        return Err("empty element name".into());
    }
    Ok((element.to_string(), &s[close + 1..]))
}

fn parse_interaction(s: &str) -> Result<(Interaction, &str), String> {
    let s = s.trim_start();
    if let Some(body) = s.strip_prefix("click(") {
        let (element, rest) = element_name(body)?;
        Ok((Interaction::Click { element }, rest))
    } else if let Some(body) = s.strip_prefix("type(") {
        let (text, body) = take_quoted(body.trim_start())?;
        let body = body
            .trim_start()
            .strip_prefix(',')
            .ok_or("expected `,` after the typed text")?;
        let (element, rest) = element_name(body)?;
        Ok((Interaction::TypeText { text, element }, rest))
    } else if let Some(body) = s.strip_prefix("scroll(") {
        let close = body.find(')').ok_or("missing `)`")?;
        let dir = match body[..close].trim() {
            "up" => ScrollDirection::Up,
            "down" => ScrollDirection::Down,
            other => {
                return Err(format!(
                    "scroll direction must be up or down, got `{other}`"
                ))
            }
        };
        Ok((Interaction::Scroll(dir), &body[close + 1..]))
    } else {
        Err("expected click(...), type(...) or scroll(...)".into())
    }
}
