/**
 * The core's vocabulary file format: one `<id><TAB><escaped-text>` line per
 * token, ids ascending from 0, escapes \n \t \\, comments start with #!.
 * The host exports its tokenizer table in this format so both sides agree
 * on ids and texts.
 */

export class Vocab {
  readonly texts: string[];

  constructor(texts: string[]) {
    if (texts.length < 2) throw new Error("vocabulary needs at least 2 tokens");
    const seen = new Set<string>();
    for (const text of texts) {
      if (!text) throw new Error("empty token text");
      if (seen.has(text)) throw new Error(`duplicate token text: ${JSON.stringify(text)}`);
      seen.add(text);
    }
    this.texts = [...texts];
  }

  get size(): number {
    return this.texts.length;
  }

  text(id: number): string {
    const t = this.texts[id];
    if (t === undefined) throw new Error(`token id ${id} outside vocabulary`);
    return t;
  }

  detokenize(ids: number[]): string {
    return ids.map((id) => this.text(id)).join("");
  }

  toFileString(): string {
    return this.texts.map((text, id) => `${id}\t${escapeTokenText(text)}`).join("\n") + "\n";
  }
}

export function escapeTokenText(text: string): string {
  let out = "";
  for (const ch of text) {
    if (ch === "\\") out += "\\\\";
    else if (ch === "\n") out += "\\n";
    else if (ch === "\t") out += "\\t";
    else out += ch;
  }
  return out;
}

export function unescapeTokenText(text: string): string {
  let out = "";
  let i = 0;
  while (i < text.length) {
    const ch = text[i];
    if (ch === "\\") {
      const next = text[i + 1];
      if (next === "n") out += "\n";
      else if (next === "t") out += "\t";
      else if (next === "\\") out += "\\";
      else throw new Error(`bad escape at ${i}`);
      i += 2;
    } else {
      out += ch;
      i += 1;
    }
  }
  return out;
}

export function parseVocabFile(content: string): Vocab {
  const texts: string[] = [];
  let lineno = 0;
  for (const raw of content.split("\n")) {
    lineno += 1;
    if (!raw || raw.startsWith("#!")) continue;
    const tab = raw.indexOf("\t");
    if (tab < 0) throw new Error(`line ${lineno}: missing tab separator`);
    const id = Number(raw.slice(0, tab));
    if (id !== texts.length) throw new Error(`line ${lineno}: non-contiguous id ${id}`);
    texts.push(unescapeTokenText(raw.slice(tab + 1)));
  }
  return new Vocab(texts);
}
