//! Wire format: a 4-byte big-endian length, then the UTF-8 payload
//! `(<performative> :sender s :receiver r [:reply-with t] [:in-reply-to t]
//! :language l :ontology o :content "<escaped>")`.

use std::io::{self, Read, Write};

use super::message::{AclMessage, Content, Performative};
use crate::error::{CoreError, Result};

/// Frames above this size are rejected rather than allocated.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

pub fn encode_payload(m: &AclMessage) -> Result<String> {
    m.validate()?;
    let mut out = String::with_capacity(96);
    out.push('(');
    out.push_str(m.performative.as_str());
    out.push_str(" :sender ");
    out.push_str(&m.sender);
    out.push_str(" :receiver ");
    out.push_str(&m.receiver);
    if let Some(t) = &m.reply_with {
        out.push_str(" :reply-with ");
        out.push_str(t);
    }
    if let Some(t) = &m.in_reply_to {
        out.push_str(" :in-reply-to ");
        out.push_str(t);
    }
    out.push_str(" :language ");
    out.push_str(&m.language);
    out.push_str(" :ontology ");
    out.push_str(&m.ontology);
    out.push_str(" :content \"");
    for c in m.content.text().chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push_str("\")");
    Ok(out)
}

pub fn encode(m: &AclMessage) -> Result<Vec<u8>> {
    let payload = encode_payload(m)?;
    let len = u32::try_from(payload.len()).map_err(|_| CoreError::Codec("payload too large".into()))?;
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(payload.as_bytes());
    Ok(out)
}

/// Decodes one frame, returning the message and the bytes consumed.
pub fn decode(frame: &[u8]) -> Result<(AclMessage, usize)> {
    if frame.len() < 4 {
        return Err(CoreError::Codec("short frame header".into()));
    }
    let len = u32::from_be_bytes([frame[0], frame[1], frame[2], frame[3]]) as usize;
    let body = frame.get(4..4 + len).ok_or_else(|| CoreError::Codec("truncated frame".into()))?;
    let text = std::str::from_utf8(body).map_err(|e| CoreError::Codec(e.to_string()))?;
    Ok((decode_payload(text)?, 4 + len))
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.s[self.pos..].starts_with(' ') {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.s[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(CoreError::Codec(format!("expected `{c}` at byte {}", self.pos)))
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        let rest = &self.s[self.pos..];
        let end = rest.find([' ', ')']).unwrap_or(rest.len());
        if end == 0 {
            return Err(CoreError::Codec(format!("expected token at byte {}", self.pos)));
        }
        self.pos += end;
        Ok(&rest[..end])
    }

    fn string(&mut self) -> Result<String> {
        self.expect('"')?;
        let mut out = String::new();
        let mut chars = self.s[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e @ ('"' | '\\'))) => out.push(e),
                    _ => return Err(CoreError::Codec("bad escape".into())),
                },
                c => out.push(c),
            }
        }
        Err(CoreError::Codec("unterminated string".into()))
    }
}

pub fn decode_payload(text: &str) -> Result<AclMessage> {
    let mut c = Cursor { s: text, pos: 0 };
    c.expect('(')?;
    let performative = Performative::parse(c.token()?);
    let mut fields: Vec<(&str, String)> = Vec::new();
    loop {
        c.skip_ws();
        if c.s[c.pos..].starts_with(')') {
            c.pos += 1;
            break;
        }
        c.expect(':')?;
        let key = c.token()?;
        c.skip_ws();
        let value = if key == "content" { c.string()? } else { c.token()?.to_string() };
        if fields.iter().any(|(k, _)| *k == key) {
            return Err(CoreError::Codec(format!("duplicate field :{key}")));
        }
        fields.push((key, value));
    }
    if c.pos != text.len() {
        return Err(CoreError::Codec("trailing bytes after message".into()));
    }
    let mut take = |key: &str| fields.iter().position(|(k, _)| *k == key).map(|i| fields.remove(i).1);
    let required = |v: Option<String>, key: &str| v.ok_or_else(|| CoreError::Codec(format!("missing :{key}")));
    let sender = required(take("sender"), "sender")?;
    let receiver = required(take("receiver"), "receiver")?;
    let reply_with = take("reply-with");
    let in_reply_to = take("in-reply-to");
    let language = required(take("language"), "language")?;
    let ontology = required(take("ontology"), "ontology")?;
    let content = required(take("content"), "content")?;
    if let Some((k, _)) = fields.first() {
        return Err(CoreError::Codec(format!("unknown field :{k}")));
    }
    let content = Content::interpret(&language, &content);
    Ok(AclMessage { performative, sender, receiver, reply_with, in_reply_to, language, ontology, content })
}

pub fn write_frame(w: &mut impl Write, frame: &[u8]) -> io::Result<()> {
    w.write_all(frame)?;
    w.flush()
}

/// Reads one whole frame (header included). `Ok(None)` on clean EOF.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut header = [0u8; 4];
    match r.read_exact(&mut header) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut frame = Vec::with_capacity(4 + len);
    frame.extend_from_slice(&header);
    frame.resize(4 + len, 0);
    r.read_exact(&mut frame[4..])?;
    Ok(Some(frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use stormkit_logic::parse_term;

    #[test]
    fn exact_bytes() {
        let m = AclMessage::new(Performative::AskOne, "a", "b", parse_term("location(box(X),2,3)").unwrap()).reply_with("q1");
        let payload = encode_payload(&m).unwrap();
        assert_eq!(
            payload,
            "(ask-one :sender a :receiver b :reply-with q1 :language javalog-term :ontology default :content \"location(box(X),2,3)\")"
        );
        let frame = encode(&m).unwrap();
        assert_eq!(&frame[..4], &(payload.len() as u32).to_be_bytes());
        let (back, used) = decode(&frame).unwrap();
        assert_eq!(used, frame.len());
        assert_eq!(back, m);
    }

    #[test]
    fn escapes_quotes_and_backslashes() {
        let m = AclMessage::new(Performative::Tell, "a", "b", parse_term("say('it''s \\\\ \"x\"')").unwrap());
        let payload = encode_payload(&m).unwrap();
        assert!(payload.contains("\\\""));
        assert_eq!(decode_payload(&payload).unwrap(), m);
        let text = AclMessage::new(Performative::Tell, "a", "b", parse_term("x").unwrap()).with_text("no \"term\" here \\");
        let m2 = AclMessage { language: "english".into(), ..text };
        assert_eq!(decode_payload(&encode_payload(&m2).unwrap()).unwrap(), m2);
    }

    #[test]
    fn rejects_bad_tokens_and_frames() {
        let bad = AclMessage::new(Performative::Tell, "a b", "c", parse_term("x").unwrap());
        assert!(encode(&bad).is_err());
        assert!(decode(&[0, 0, 0, 9, b'(']).is_err());
        assert!(decode_payload("(tell :sender a)").is_err());
        assert!(decode_payload("(tell :sender a :receiver b :language l :ontology o :content \"x\" :bogus y)").is_err());
    }

    #[test]
    fn non_canonical_text_stays_text() {
        let p = "(tell :sender a :receiver b :language javalog-term :ontology o :content \"f( a )\")";
        let m = decode_payload(p).unwrap();
        assert_eq!(m.content, Content::Text("f( a )".into()));
    }
}
