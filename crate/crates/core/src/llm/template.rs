//! Prompt templates with `{name}` placeholders.
//!
//! `{` followed by an identifier opens a placeholder, which must close with
//! `}` right after the identifier. `{{` is a literal `{`. Any other `{` is
//! literal, so JSON examples can be written inside templates as-is.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LlmError;

/// Shape the model's answer must have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputShape {
    FreeText,
    JsonArray,
    JsonObject,
}

impl OutputShape {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputShape::FreeText => "free_text",
            OutputShape::JsonArray => "json_array",
            OutputShape::JsonObject => "json_object",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "free_text" => Some(OutputShape::FreeText),
            "json_array" => Some(OutputShape::JsonArray),
            "json_object" => Some(OutputShape::JsonObject),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

fn parse_body(body: &str) -> Result<Vec<Segment>, LlmError> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = body.char_indices().peekable();
    while let Some((pos, c)) = chars.next() {
        if c != '{' {
            literal.push(c);
            continue;
        }
        match chars.peek() {
            Some((_, '{')) => {
                chars.next();
                literal.push('{');
            }
            Some((_, n)) if n.is_ascii_alphabetic() || *n == '_' => {
                let mut name = String::new();
                while let Some((_, n)) = chars.peek() {
                    if n.is_ascii_alphanumeric() || *n == '_' {
                        name.push(*n);
                        chars.next();
                    } else {
                        break;
                    }
                }
                match chars.next() {
                    Some((_, '}')) => {
                        if !literal.is_empty() {
                            segments.push(Segment::Literal(std::mem::take(&mut literal)));
                        }
                        segments.push(Segment::Placeholder(name));
                    }
                    _ => {
                        return Err(LlmError::Template(format!(
                            "unterminated placeholder {{{name} at byte {pos}"
                        )))
                    }
                }
            }
            _ => literal.push('{'),
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub body: String,
    pub expects: OutputShape,
    pub description: String,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    pub fn new(
        template_id: &str,
        body: &str,
        expects: OutputShape,
        description: &str,
    ) -> Result<Self, LlmError> {
        if template_id.is_empty()
            || !template_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(LlmError::Template(format!("invalid template id {template_id:?}")));
        }
        Ok(Self {
            template_id: template_id.to_string(),
            body: body.to_string(),
            expects,
            description: description.to_string(),
            segments: parse_body(body)?,
        })
    }

    /// Parses the on-disk form: optional `@expects:` / `@description:`
    /// header lines, then the body. Missing header fields fall back to
    /// `defaults`.
    pub fn from_file_text(
        template_id: &str,
        text: &str,
        defaults: Option<&PromptTemplate>,
    ) -> Result<Self, LlmError> {
        let mut expects = defaults.map(|d| d.expects);
        let mut description = defaults.map(|d| d.description.clone());
        let mut rest = text;
        loop {
            let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
            if let Some(value) = line.strip_prefix("@expects:") {
                expects = Some(OutputShape::parse(value).ok_or_else(|| {
                    LlmError::Template(format!("{template_id}: unknown output shape {value:?}"))
                })?);
            } else if let Some(value) = line.strip_prefix("@description:") {
                description = Some(value.trim().to_string());
            } else {
                break;
            }
            rest = tail;
        }
        Self::new(
            template_id,
            rest,
            expects.unwrap_or(OutputShape::FreeText),
            &description.unwrap_or_default(),
        )
    }

    /// The on-disk form written by [`PromptLibrary::write_missing`].
    pub fn to_file_text(&self) -> String {
        format!(
            "@expects: {}\n@description: {}\n{}",
            self.expects.as_str(),
            self.description,
            self.body
        )
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(name) => Some(name.as_str()),
                Segment::Literal(_) => None,
            })
            .collect()
    }

    /// Substitutes every placeholder; unused variables are ignored.
    pub fn render(&self, variables: &BTreeMap<String, String>) -> Result<String, LlmError> {
        let missing: Vec<&str> = self
            .placeholders()
            .into_iter()
            .filter(|p| !variables.contains_key(*p))
            .collect();
        if !missing.is_empty() {
            return Err(LlmError::Template(format!(
                "{}: unbound placeholder(s): {}",
                self.template_id,
                missing.join(", ")
            )));
        }
        let mut out = String::with_capacity(self.body.len());
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Placeholder(name) => out.push_str(&variables[name]),
            }
        }
        Ok(out)
    }
}

pub const SUGGEST_RELATED: &str = "suggest_related";
pub const SUGGEST_CROSSLINGUAL: &str = "suggest_crosslingual";
pub const FILTER_SAFE: &str = "filter_safe";
pub const GEN_MCQ: &str = "gen_mcq";
pub const GEN_FIB: &str = "gen_fib";
pub const DESCRIBE_WORD: &str = "describe_word";
pub const JUDGE_QA: &str = "judge_qa";

const BUILTIN: &[(&str, &str)] = &[
    (SUGGEST_RELATED, include_str!("../../prompts/suggest_related.txt")),
    (SUGGEST_CROSSLINGUAL, include_str!("../../prompts/suggest_crosslingual.txt")),
    (FILTER_SAFE, include_str!("../../prompts/filter_safe.txt")),
    (GEN_MCQ, include_str!("../../prompts/gen_mcq.txt")),
    (GEN_FIB, include_str!("../../prompts/gen_fib.txt")),
    (DESCRIBE_WORD, include_str!("../../prompts/describe_word.txt")),
    (JUDGE_QA, include_str!("../../prompts/judge_qa.txt")),
];

/// Registry of templates keyed by id.
#[derive(Debug, Clone, Default)]
pub struct PromptLibrary {
    templates: BTreeMap<String, PromptTemplate>,
}

impl PromptLibrary {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The default templates shipped with the crate.
    pub fn builtin() -> Self {
        let mut lib = Self::empty();
        for (id, text) in BUILTIN {
            let template =
                PromptTemplate::from_file_text(id, text, None).expect("builtin prompts parse");
            lib.templates.insert(id.to_string(), template);
        }
        lib
    }

    /// Built-in templates overlaid with every `<id>.txt` in `dir`.
    pub fn builtin_with_overrides(dir: &Path) -> Result<Self, LlmError> {
        let mut lib = Self::builtin();
        lib.load_dir(dir)?;
        Ok(lib)
    }

    pub fn load_dir(&mut self, dir: &Path) -> Result<(), LlmError> {
        if !dir.exists() {
            return Ok(());
        }
        let entries = fs::read_dir(dir)
            .map_err(|e| LlmError::Template(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = fs::read_to_string(&path)
                .map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
            let template = PromptTemplate::from_file_text(id, &text, self.templates.get(id))?;
            self.templates.insert(id.to_string(), template);
        }
        Ok(())
    }

    /// Writes each template that has no file yet, leaving user edits alone.
    pub fn write_missing(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for template in self.templates.values() {
            let path = dir.join(format!("{}.txt", template.template_id));
            if !path.exists() {
                fs::write(path, template.to_file_text())?;
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.template_id.clone(), template);
    }

    pub fn get(&self, template_id: &str) -> Option<&PromptTemplate> {
        self.templates.get(template_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(
        &self,
        template_id: &str,
        variables: &BTreeMap<String, String>,
    ) -> Result<String, LlmError> {
        self.get(template_id)
            .ok_or_else(|| LlmError::Template(format!("unknown template {template_id:?}")))?
            .render(variables)
    }
}
