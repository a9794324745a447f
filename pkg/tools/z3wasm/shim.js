#!/usr/bin/env node
// SMT-LIB 2 REPL over the z3 WebAssembly build (npm package "z3-solver").
//
// Behaves like `z3 -in`: reads SMT-LIB commands from stdin, evaluates them
// on a persistent context, and writes responses to stdout as soon as each
// command finishes.  Intended for hosts that talk SMT-LIB over pipes and
// cannot assume a native z3 binary.

'use strict';

const { init } = require('z3-solver');

// Index just past the first complete top-level s-expression in `buf`,
// -1 if incomplete, -2 on unbalanced input.  Strings ("" escapes) and
// ;-comments are respected.
function commandEnd(buf) {
  let depth = 0;
  let inStr = false;
  let inComment = false;
  let seenParen = false;
  for (let i = 0; i < buf.length; i++) {
    const ch = buf[i];
    if (inComment) {
      if (ch === '\n') inComment = false;
      continue;
    }
    if (inStr) {
      if (ch === '"') {
        if (buf[i + 1] === '"') i++;
        else inStr = false;
      }
      continue;
    }
    if (ch === ';') { inComment = true; continue; }
    if (ch === '"') { inStr = true; continue; }
    if (ch === '(') { depth++; seenParen = true; }
    else if (ch === ')') {
      depth--;
      if (depth === 0 && seenParen) return i + 1;
      if (depth < 0) return -2;
    }
  }
  return -1;
}

(async () => {
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);

  let buf = '';
  const queue = [];
  let running = false;
  let eof = false;

  async function pump() {
    if (running) return;
    running = true;
    while (queue.length > 0) {
      const cmd = queue.shift();
      if (/^\(\s*exit\s*\)\s*$/.test(cmd)) process.exit(0);
      let out;
      try {
        out = await Z3.eval_smtlib2_string(ctx, cmd);
      } catch (err) {
        out = '(error "' + String(err).replace(/"/g, "'") + '")\n';
      }
      if (out && out.length > 0) {
        process.stdout.write(out.endsWith('\n') ? out : out + '\n');
      }
    }
    running = false;
    if (eof) process.exit(0);
  }

  process.stdin.setEncoding('utf8');
  process.stdin.on('data', (chunk) => {
    buf += chunk;
    for (;;) {
      const end = commandEnd(buf);
      if (end === -1) break;
      if (end === -2) {
        process.stdout.write('(error "unbalanced parentheses")\n');
        buf = '';
        break;
      }
      queue.push(buf.slice(0, end));
      buf = buf.slice(end);
    }
    pump();
  });
  process.stdin.on('end', () => { eof = true; pump(); });
})();
