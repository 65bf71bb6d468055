// Reads a case file and prints what the page runtime computes for it.
'use strict';
const fs = require('fs');
const rt = require(process.argv[2]);
const input = JSON.parse(fs.readFileSync(process.argv[3], 'utf8'));
const out = { codes: [], derived: [], delays: [] };
for (const state of input.states) {
  let code;
  try {
    code = rt.computeOperationCode(state, input.config);
  } catch (e) {
    code = 'error: ' + e.message;
  }
  out.codes.push(code);
  const derived = rt.deriveAll(state, input.config.judge_rules);
  const shown = {};
  for (const k of Object.keys(derived)) shown[k] = rt.display(derived[k]);
  out.derived.push(shown);
}
for (const load of input.loads) out.delays.push(rt.popupDelay(input.config, load));
process.stdout.write(JSON.stringify(out));
