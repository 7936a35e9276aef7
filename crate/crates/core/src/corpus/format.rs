//! Corpus input grammars.
//!
//! `plain` (one record per line, UTF-8):
//!
//! ```text
//! # comment                 ignored when the line has no TAB
//! DOC <id>                  starts a document; ids must be unique
//! TITLE <text>              title text for the current document (excluded)
//! TITLE                     following token lines, up to the next PAR, are title tokens (excluded)
//! PAR [<id>]                starts a paragraph; id defaults to `<doc>:p<n>`
//! <form>\t<lemma>           one token
//!                           blank line ends the current sentence
//! ```
//!
//! Tokens inside a document but before its first `PAR` open an implicit paragraph.
//!
//! `conllu` follows CoNLL-U: `# newdoc id = X`, `# newpar [id = Y]`,
//! `# title = T` comments; token lines with at least three TAB-separated
//! columns (ID, FORM, LEMMA, ...); multiword ranges (`1-2`) and empty nodes
//! (`1.1`) are skipped; blank line ends a sentence.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Document, Paragraph, Sentence, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    #[default]
    #[serde(alias = "plain")]
    PlainWithLemmas,
    #[serde(alias = "conllu")]
    ConlluLike,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" | "plain-with-lemmas" => Ok(InputFormat::PlainWithLemmas),
            "conllu" | "conllu-like" => Ok(InputFormat::ConlluLike),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

pub fn ingest(path: &Path, format: InputFormat, id: &str) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text, format, id)
}

pub fn parse(text: &str, format: InputFormat, id: &str) -> Result<Corpus, CorpusError> {
    let mut builder = Builder::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        match format {
            InputFormat::PlainWithLemmas => builder.plain_line(line, line_no)?,
            InputFormat::ConlluLike => builder.conllu_line(line, line_no)?,
        }
    }
    let documents = builder.finish();
    if documents.is_empty() {
        return Err(CorpusError::Empty(id.to_string()));
    }
    Ok(Corpus::new(id, documents))
}

#[derive(Default)]
struct Builder {
    documents: Vec<Document>,
    seen_ids: HashSet<String>,
    paragraph_id: Option<String>,
    sentences: Vec<Sentence>,
    sentence: Vec<Token>,
    in_title: bool,
    title_tokens: Vec<String>,
}

fn err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        line,
        message: message.into(),
    }
}

impl Builder {
    fn current_doc(&mut self) -> Option<&mut Document> {
        self.documents.last_mut()
    }

    fn start_document(&mut self, id: &str, line: usize) -> Result<(), CorpusError> {
        if id.is_empty() {
            return Err(err(line, "document record without an id"));
        }
        self.close_paragraph();
        if !self.seen_ids.insert(id.to_string()) {
            return Err(CorpusError::DuplicateDocument {
                id: id.to_string(),
                line,
            });
        }
        self.documents.push(Document {
            id: id.to_string(),
            title: None,
            paragraphs: Vec::new(),
        });
        Ok(())
    }

    fn start_paragraph(&mut self, id: Option<&str>, line: usize) -> Result<(), CorpusError> {
        if self.documents.is_empty() {
            return Err(err(line, "paragraph before any document"));
        }
        self.close_paragraph();
        let doc = self.documents.last().expect("checked above");
        let pid = match id {
            Some(id) if !id.is_empty() => id.to_string(),
            _ => format!("{}:p{}", doc.id, doc.paragraphs.len() + 1),
        };
        self.paragraph_id = Some(pid);
        Ok(())
    }

    fn set_title(&mut self, text: &str, line: usize) -> Result<(), CorpusError> {
        let doc = self
            .current_doc()
            .ok_or_else(|| err(line, "title before any document"))?;
        doc.title = Some(text.to_string());
        Ok(())
    }

    fn push_token(&mut self, form: &str, lemma: &str, line: usize) -> Result<(), CorpusError> {
        if self.documents.is_empty() {
            return Err(err(line, "token before any document"));
        }
        if self.in_title {
            self.title_tokens.push(form.to_string());
            return Ok(());
        }
        if form.is_empty() {
            return Err(err(line, "token without a form"));
        }
        let token = Token::new(form, lemma)
            .ok_or_else(|| err(line, format!("token `{form}` has no lemma")))?;
        if self.paragraph_id.is_none() {
            self.start_paragraph(None, line)?;
        }
        self.sentence.push(token);
        Ok(())
    }

    fn close_sentence(&mut self) {
        if !self.sentence.is_empty() {
            self.sentences.push(Sentence {
                tokens: std::mem::take(&mut self.sentence),
            });
        }
    }

    fn close_title(&mut self) {
        if self.in_title {
            self.in_title = false;
            let text = std::mem::take(&mut self.title_tokens).join(" ");
            if let Some(doc) = self.documents.last_mut() {
                if doc.title.is_none() && !text.is_empty() {
                    doc.title = Some(text);
                }
            }
        }
    }

    fn close_paragraph(&mut self) {
        self.close_title();
        self.close_sentence();
        if let Some(pid) = self.paragraph_id.take() {
            let doc = self.documents.last_mut().expect("paragraph implies document");
            let sentences = std::mem::take(&mut self.sentences);
            if !sentences.is_empty() {
                doc.paragraphs
                    .push(Paragraph::new(pid, doc.id.clone(), sentences));
            }
        }
    }

    fn finish(mut self) -> Vec<Document> {
        self.close_paragraph();
        self.documents
    }

    fn plain_line(&mut self, line: &str, no: usize) -> Result<(), CorpusError> {
        if line.contains('\t') {
            let mut fields = line.split('\t');
            let form = fields.next().unwrap_or_default();
            let lemma = fields.next().unwrap_or_default();
            if fields.next().is_some() {
                return Err(err(no, "token line must have exactly two TAB-separated fields"));
            }
            return self.push_token(form, lemma, no);
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if self.in_title {
                return Ok(());
            }
            self.close_sentence();
            return Ok(());
        }
        if trimmed.starts_with('#') {
            return Ok(());
        }
        let (keyword, rest) = match trimmed.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (trimmed, ""),
        };
        match keyword {
            "DOC" => self.start_document(rest, no),
            "PAR" => self.start_paragraph(Some(rest), no),
            "TITLE" => {
                if self.documents.is_empty() {
                    return Err(err(no, "title before any document"));
                }
                if rest.is_empty() {
                    self.close_paragraph();
                    self.in_title = true;
                    Ok(())
                } else {
                    self.set_title(rest, no)
                }
            }
            other => Err(err(no, format!("unknown record `{other}`"))),
        }
    }

    fn conllu_line(&mut self, line: &str, no: usize) -> Result<(), CorpusError> {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            self.close_sentence();
            return Ok(());
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("newdoc") {
                let id = rest.trim().strip_prefix("id").map(|r| r.trim_start().trim_start_matches('=').trim());
                return self.start_document(id.unwrap_or(""), no);
            }
            if let Some(rest) = comment.strip_prefix("newpar") {
                let id = rest.trim().strip_prefix("id").map(|r| r.trim_start().trim_start_matches('=').trim());
                return self.start_paragraph(id, no);
            }
            if let Some(rest) = comment.strip_prefix("title") {
                if let Some(text) = rest.trim_start().strip_prefix('=') {
                    return self.set_title(text.trim(), no);
                }
            }
            return Ok(());
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 3 {
            return Err(err(no, "token line needs at least ID, FORM and LEMMA columns"));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            return Ok(());
        }
        if cols[2] == "_" && cols[1] != "_" {
            return Err(err(no, format!("token `{}` has no lemma", cols[1])));
        }
        self.push_token(cols[1], cols[2], no)
    }
}

/// Serializes a corpus in the `plain` grammar; [`parse`] reads it back.
pub fn write_plain(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in &corpus.documents {
        out.push_str("DOC ");
        out.push_str(&doc.id);
        out.push('\n');
        if let Some(title) = &doc.title {
            out.push_str("TITLE ");
            out.push_str(title);
            out.push('\n');
        }
        for p in &doc.paragraphs {
            out.push_str("PAR ");
            out.push_str(&p.id);
            out.push('\n');
            for s in &p.sentences {
                for t in &s.tokens {
                    out.push_str(&t.form);
                    out.push('\t');
                    out.push_str(&t.lemma);
                    out.push('\n');
                }
                out.push('\n');
            }
        }
    }
    out
}
