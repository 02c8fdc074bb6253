"""Restricted XML reading and writing.

The interchange formats deliberately accept only a small XML subset, parsed
by hand so the attack surface is explicit:

* no document type declarations (``<!DOCTYPE``) and no entity definitions,
  which closes off entity-expansion and external-entity tricks;
* no numeric character references (``&#...;``); exactly the five predefined
  entities ``&lt; &gt; &amp; &quot; &apos;`` are decoded;
* no processing instructions beyond the leading XML declaration, no CDATA;
* no mixed content: an element holds either text or child elements
  (whitespace between child elements is ignored);
* no namespaces.

Comments are skipped. Every diagnostic carries a 1-based line and column.
Attribute values keep their whitespace literally; this subset does not do
XML attribute-value normalization.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

from .model import KnowledgeError

_ENTITIES = {"lt": "<", "gt": ">", "amp": "&", "quot": '"', "apos": "'"}

XML_DECLARATION = '<?xml version="1.0" encoding="UTF-8"?>'


class XmlParseError(KnowledgeError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}")


@dataclass
class XmlElement:
    tag: str
    attrs: dict[str, str] = field(default_factory=dict)
    children: list["XmlElement"] = field(default_factory=list)
    text: str = ""
    line: int = 0
    col: int = 0

    def find(self, tag: str) -> "XmlElement | None":
        for child in self.children:
            if child.tag == tag:
                return child
        return None

    def find_all(self, tag: str) -> list["XmlElement"]:
        return [c for c in self.children if c.tag == tag]

    def get(self, attr: str, default: str | None = None) -> str | None:
        return self.attrs.get(attr, default)


_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_NAME_REST = _NAME_START | set("0123456789.-")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line_starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self.line_starts.append(i + 1)

    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = bisect_right(self.line_starts, pos)
        return line, pos - self.line_starts[line - 1] + 1

    def error(self, message: str, pos: int | None = None) -> XmlParseError:
        line, col = self.where(pos)
        return XmlParseError(message, line, col)

    def eof(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self, n: int = 1) -> str:
        return self.text[self.pos:self.pos + n]

    def starts_with(self, s: str) -> bool:
        return self.text.startswith(s, self.pos)

    def skip_whitespace(self) -> None:
        while not self.eof() and self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def skip_misc(self) -> None:
        """Whitespace and comments between markup."""
        while True:
            self.skip_whitespace()
            if self.starts_with("<!--"):
                end = self.text.find("-->", self.pos + 4)
                if end == -1:
                    raise self.error("unterminated comment")
                if "--" in self.text[self.pos + 4:end]:
                    raise self.error("'--' inside a comment")
                self.pos = end + 3
            else:
                return

    def reject_banned(self) -> None:
        if self.starts_with("<!DOCTYPE") or self.starts_with("<!doctype"):
            raise self.error("document type declarations are not accepted")
        if self.starts_with("<![CDATA["):
            raise self.error("CDATA sections are not accepted")
        if self.starts_with("<!"):
            raise self.error("declarations are not accepted")
        if self.starts_with("<?"):
            raise self.error("processing instructions are not accepted")

    def parse_name(self) -> str:
        start = self.pos
        if self.eof() or self.text[self.pos] not in _NAME_START:
            raise self.error("expected a name")
        self.pos += 1
        while not self.eof() and self.text[self.pos] in _NAME_REST:
            self.pos += 1
        name = self.text[start:self.pos]
        # the one namespace-ish thing the subset admits is the fixed kt: prefix
        if self.peek() == ":":
            if name != "kt":
                raise self.error(f"namespace prefix {name!r} not accepted (only kt:)", start)
            self.pos += 1
            rest_start = self.pos
            if self.eof() or self.text[self.pos] not in _NAME_START:
                raise self.error("expected a name after kt:")
            self.pos += 1
            while not self.eof() and self.text[self.pos] in _NAME_REST:
                self.pos += 1
            name = f"kt:{self.text[rest_start:self.pos]}"
        return name

    def decode_entity(self) -> str:
        # positioned at '&'
        amp = self.pos
        if self.starts_with("&#"):
            raise self.error("numeric character references are not accepted", amp)
        end = self.text.find(";", amp + 1, amp + 8)
        if end == -1:
            raise self.error("'&' must start an entity reference", amp)
        name = self.text[amp + 1:end]
        if name not in _ENTITIES:
            raise self.error(f"unknown entity &{name};", amp)
        self.pos = end + 1
        return _ENTITIES[name]

    def parse_attr_value(self) -> str:
        quote = self.peek()
        if quote not in ("'", '"'):
            raise self.error("expected a quoted attribute value")
        self.pos += 1
        out = []
        while True:
            if self.eof():
                raise self.error("unterminated attribute value")
            ch = self.text[self.pos]
            if ch == quote:
                self.pos += 1
                return "".join(out)
            if ch == "<":
                raise self.error("'<' is not allowed in an attribute value")
            if ch == "&":
                out.append(self.decode_entity())
            else:
                out.append(ch)
                self.pos += 1

    def parse_element(self) -> XmlElement:
        open_pos = self.pos
        if self.peek() != "<":
            raise self.error("expected '<'")
        self.pos += 1
        tag = self.parse_name()
        element = XmlElement(tag=tag)
        element.line, element.col = self.where(open_pos)

        while True:
            had_space = False
            while not self.eof() and self.text[self.pos] in " \t\r\n":
                self.pos += 1
                had_space = True
            if self.starts_with("/>"):
                self.pos += 2
                return element
            if self.peek() == ">":
                self.pos += 1
                break
            if not had_space:
                raise self.error("expected whitespace before attribute")
            attr_pos = self.pos
            name = self.parse_name()
            self.skip_whitespace()
            if self.peek() != "=":
                raise self.error("expected '=' after attribute name")
            self.pos += 1
            self.skip_whitespace()
            value = self.parse_attr_value()
            if name in element.attrs:
                raise self.error(f"duplicate attribute {name!r}", attr_pos)
            element.attrs[name] = value

        # content
        text_parts: list[str] = []
        while True:
            if self.eof():
                raise self.error(f"unterminated element <{tag}>", open_pos)
            ch = self.text[self.pos]
            if ch == "<":
                if self.starts_with("</"):
                    self.pos += 2
                    closing = self.parse_name()
                    if closing != tag:
                        raise self.error(f"mismatched closing tag </{closing}>, expected </{tag}>")
                    self.skip_whitespace()
                    if self.peek() != ">":
                        raise self.error("expected '>' in closing tag")
                    self.pos += 1
                    break
                if self.starts_with("<!--"):
                    self.skip_misc()
                    continue
                self.reject_banned()
                element.children.append(self.parse_element())
                continue
            if ch == "&":
                text_parts.append(self.decode_entity())
                continue
            text_parts.append(ch)
            self.pos += 1

        text = "".join(text_parts)
        if element.children:
            if text.strip():
                raise self.error(
                    f"element <{tag}> mixes text and child elements", open_pos)
        else:
            element.text = text
        return element

    def parse_document(self) -> XmlElement:
        if self.starts_with("﻿"):
            self.pos += 1
        if self.starts_with("<?xml") and self.peek(6)[5:] in (" ", "\t", "\r", "\n", "?"):
            end = self.text.find("?>", self.pos)
            if end == -1:
                raise self.error("unterminated XML declaration")
            self.pos = end + 2
        self.skip_misc()
        if self.eof():
            raise self.error("missing root element")
        self.reject_banned()
        if self.peek() != "<":
            raise self.error("content before the root element")
        root = self.parse_element()
        self.skip_misc()
        if not self.eof():
            raise self.error("content after the root element")
        return root


def parse_xml(text: str) -> XmlElement:
    """Parse a document in the restricted subset; returns the root element."""
    return _Parser(text).parse_document()


def escape_text(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def escape_attr(s: str) -> str:
    return escape_text(s).replace('"', "&quot;")


def _serialize_into(element: XmlElement, depth: int, indent: str, out: list[str]) -> None:
    pad = indent * depth
    attrs = "".join(f' {k}="{escape_attr(v)}"' for k, v in element.attrs.items())
    if element.children:
        out.append(f"{pad}<{element.tag}{attrs}>")
        for child in element.children:
            _serialize_into(child, depth + 1, indent, out)
        out.append(f"{pad}</{element.tag}>")
    elif element.text:
        out.append(f"{pad}<{element.tag}{attrs}>{escape_text(element.text)}</{element.tag}>")
    else:
        out.append(f"{pad}<{element.tag}{attrs}/>")


def serialize(root: XmlElement, indent: int = 2) -> str:
    """Pretty canonical body: one element per line, children indented."""
    out: list[str] = []
    _serialize_into(root, 0, " " * indent, out)
    return "\n".join(out)


def serialize_document(root: XmlElement, indent: int = 2) -> str:
    """Full document: declaration, canonical body, trailing newline."""
    return XML_DECLARATION + "\n" + serialize(root, indent) + "\n"
