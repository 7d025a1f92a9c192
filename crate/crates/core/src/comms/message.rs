use std::fmt;

use stormkit_logic::{parse_term, Term};

use crate::error::{CoreError, Result};

/// Content language whose content is a logic term.
pub const TERM_LANGUAGE: &str = "javalog-term";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Performative {
    AskOne,
    AskAll,
    AskIf,
    Tell,
    Untell,
    Deny,
    Achieve,
    Unachieve,
    Advertise,
    Subscribe,
    Reply,
    Sorry,
    Error,
    Broadcast,
    Register,
    Unregister,
    Other(String),
}

impl Performative {
    const NAMED: [(&'static str, Performative); 16] = [
        ("ask-one", Performative::AskOne),
        ("ask-all", Performative::AskAll),
        ("ask-if", Performative::AskIf),
        ("tell", Performative::Tell),
        ("untell", Performative::Untell),
        ("deny", Performative::Deny),
        ("achieve", Performative::Achieve),
        ("unachieve", Performative::Unachieve),
        ("advertise", Performative::Advertise),
        ("subscribe", Performative::Subscribe),
        ("reply", Performative::Reply),
        ("sorry", Performative::Sorry),
        ("error", Performative::Error),
        ("broadcast", Performative::Broadcast),
        ("register", Performative::Register),
        ("unregister", Performative::Unregister),
    ];

    pub fn parse(word: &str) -> Performative {
        Self::NAMED.iter().find(|(w, _)| *w == word).map(|(_, p)| p.clone()).unwrap_or_else(|| Performative::Other(word.to_string()))
    }

    pub fn as_str(&self) -> &str {
        if let Performative::Other(w) = self {
            return w;
        }
        Self::NAMED.iter().find(|(_, p)| p == self).map(|(w, _)| *w).expect("named performative")
    }
}

impl fmt::Display for Performative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Content {
    Term(Term),
    Text(String),
}

impl Content {
    pub fn text(&self) -> String {
        match self {
            Content::Term(t) => t.to_string(),
            Content::Text(s) => s.clone(),
        }
    }

    pub fn as_term(&self) -> Option<&Term> {
        match self {
            Content::Term(t) => Some(t),
            Content::Text(_) => None,
        }
    }

    /// How the content appears inside other terms: itself, or the raw text as an atom.
    pub fn to_term(&self) -> Term {
        match self {
            Content::Term(t) => t.clone(),
            Content::Text(s) => Term::atom(s.as_str()),
        }
    }

    /// Interprets text the way the decoder does: a term exactly when the
    /// language is the term language and the text is a canonical term.
    pub fn interpret(language: &str, text: &str) -> Content {
        if language == TERM_LANGUAGE {
            if let Ok(t) = parse_term(text) {
                if t.to_string() == text {
                    return Content::Term(t);
                }
            }
        }
        Content::Text(text.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AclMessage {
    pub performative: Performative,
    pub sender: String,
    pub receiver: String,
    pub reply_with: Option<String>,
    pub in_reply_to: Option<String>,
    pub language: String,
    pub ontology: String,
    pub content: Content,
}

impl AclMessage {
    pub fn new(performative: Performative, sender: &str, receiver: &str, content: Term) -> Self {
        AclMessage {
            performative,
            sender: sender.to_string(),
            receiver: receiver.to_string(),
            reply_with: None,
            in_reply_to: None,
            language: TERM_LANGUAGE.to_string(),
            ontology: "default".to_string(),
            content: Content::Term(content),
        }
    }

    pub fn with_text(mut self, text: &str) -> Self {
        self.content = Content::Text(text.to_string());
        self
    }

    pub fn reply_with(mut self, token: &str) -> Self {
        self.reply_with = Some(token.to_string());
        self
    }

    pub fn ontology(mut self, ontology: &str) -> Self {
        self.ontology = ontology.to_string();
        self
    }

    /// A reply addressed back to the sender, threaded on `reply_with`.
    pub fn reply(&self, performative: Performative, content: Term) -> AclMessage {
        AclMessage {
            performative,
            sender: self.receiver.clone(),
            receiver: self.sender.clone(),
            reply_with: None,
            in_reply_to: self.reply_with.clone(),
            language: self.language.clone(),
            ontology: self.ontology.clone(),
            content: Content::Term(content),
        }
    }

    /// `msg(Performative, Sender, Receiver, Content)`.
    pub fn to_term(&self) -> Term {
        Term::compound(
            "msg",
            vec![
                Term::atom(self.performative.as_str()),
                Term::atom(self.sender.as_str()),
                Term::atom(self.receiver.as_str()),
                self.content.to_term(),
            ],
        )
    }

    /// Messages the codec reproduces exactly: valid tokens throughout, and
    /// content whose kind the decoder will infer back.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("performative", Some(self.performative.as_str())),
            ("sender", Some(self.sender.as_str())),
            ("receiver", Some(self.receiver.as_str())),
            ("reply-with", self.reply_with.as_deref()),
            ("in-reply-to", self.in_reply_to.as_deref()),
            ("language", Some(self.language.as_str())),
            ("ontology", Some(self.ontology.as_str())),
        ];
        for (field, value) in fields {
            if let Some(v) = value {
                if !is_token(v) {
                    return Err(CoreError::Codec(format!("{field} `{v}` is not a token")));
                }
            }
        }
        if self.performative == Performative::Reply && self.in_reply_to.is_none() {
            return Err(CoreError::Codec("reply without in-reply-to".into()));
        }
        let reread = Content::interpret(&self.language, &self.content.text());
        if reread != self.content {
            return Err(CoreError::Codec("content kind does not survive the wire".into()));
        }
        Ok(())
    }
}

/// Nonempty, no whitespace, parentheses, quotes or backslashes, and no
/// leading colon.
pub fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.starts_with(':') && s.chars().all(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | '"' | '\\'))
}
