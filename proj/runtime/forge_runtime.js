(function (root, factory) {
  var core = factory();
  if (typeof module === 'object' && module.exports) module.exports = core;
  if (typeof window !== 'undefined' && typeof document !== 'undefined') {
    window.forgeRuntime = core;
    core.boot(window, document);
  }
})(this, function () {
  'use strict';

  var CONFIG_ID = 'forge-runtime-config';
  var LOADS_KEY = 'forge_runtime_loads';
  var DEFAULT_KEYS = ['forge_cookie_consent', 'forge_popup_dismissed'];
  var WEEKDAYS = ['Monday', 'Tuesday', 'Wednesday', 'Thursday', 'Friday', 'Saturday', 'Sunday'];
  var FUNCTIONS = {
    weekday: [1, 1], date_between: [3, 3], day: [1, 1], month: [1, 1], year: [1, 1],
    is_date: [1, 1], number: [1, 1], fixed: [2, 2], round: [2, 2], lower: [1, 1],
    upper: [1, 1], trim: [1, 1], lookup: [2, 2], range_lookup: [2, 2], concat: [1, -1],
    'if': [3, 3], min: [2, -1], max: [2, -1]
  };
  var OPS = ['==', '!=', '<=', '>=', '<', '>', '+', '-', '*', '/'];

  // ---- values ----------------------------------------------------------

  function isObject(v) {
    return v !== null && typeof v === 'object' && !Array.isArray(v);
  }

  function has(obj, key) {
    return isObject(obj) && Object.prototype.hasOwnProperty.call(obj, key);
  }

  function norm(v) {
    return v === undefined ? null : v;
  }

  function asciiTrim(s) {
    return s.replace(/^[ \t\n\v\f\r]+|[ \t\n\v\f\r]+$/g, '');
  }

  function toNumber(v) {
    if (typeof v === 'number') return isFinite(v) ? v : null;
    if (typeof v !== 'string') return null;
    var s = asciiTrim(v);
    if (s.charAt(0) === '+') s = s.slice(1);
    if (!/^-?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/.test(s)) return null;
    var d = Number(s);
    return isFinite(d) ? d : null;
  }

  function numberValue(d) {
    return isFinite(d) ? d : null;
  }

  function truthy(v) {
    v = norm(v);
    if (v === null) return false;
    if (typeof v === 'boolean') return v;
    if (typeof v === 'number') return v !== 0;
    if (typeof v === 'string') return v.length > 0;
    if (Array.isArray(v)) return v.length > 0;
    return Object.keys(v).length > 0;
  }

  function deepEqual(a, b) {
    if (typeof a === 'number' && typeof b === 'number') return a === b;
    if (a === null || b === null || typeof a !== 'object' || typeof b !== 'object') return a === b;
    if (Array.isArray(a) !== Array.isArray(b)) return false;
    var ka = Object.keys(a), kb = Object.keys(b);
    if (ka.length !== kb.length) return false;
    for (var i = 0; i < ka.length; i++) {
      if (!Object.prototype.hasOwnProperty.call(b, ka[i])) return false;
      if (!deepEqual(a[ka[i]], b[ka[i]])) return false;
    }
    return true;
  }

  function looseEqual(a, b) {
    a = norm(a);
    b = norm(b);
    if (a === null || b === null) return a === null && b === null;
    if (typeof a === 'boolean' || typeof b === 'boolean') return a === b;
    if (typeof a === 'number' || typeof b === 'number') {
      var x = toNumber(a), y = toNumber(b);
      return x !== null && y !== null && x === y;
    }
    return deepEqual(a, b);
  }

  function display(v) {
    v = norm(v);
    if (v === null) return '';
    if (typeof v === 'string') return v;
    if (typeof v === 'boolean') return v ? 'true' : 'false';
    if (typeof v === 'number') return String(v);
    return JSON.stringify(v);
  }

  function compare(a, b) {
    if (typeof a === 'string' && typeof b === 'string') {
      var nx = toNumber(a), ny = toNumber(b);
      if (nx !== null && ny !== null) return nx < ny ? -1 : (nx > ny ? 1 : 0);
      return a < b ? -1 : (a > b ? 1 : 0);
    }
    var x = toNumber(a), y = toNumber(b);
    if (x !== null && y !== null) return x < y ? -1 : (x > y ? 1 : 0);
    return null;
  }

  function toDate(v) {
    if (typeof v !== 'string' || !/^[0-9]{4}-[0-9]{2}-[0-9]{2}$/.test(v)) return null;
    var y = +v.slice(0, 4), m = +v.slice(5, 7), d = +v.slice(8, 10);
    if (m < 1 || m > 12 || d < 1) return null;
    var dim = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31][m - 1];
    if (m === 2 && ((y % 4 === 0 && y % 100 !== 0) || y % 400 === 0)) dim = 29;
    return d <= dim ? { y: y, m: m, d: d } : null;
  }

  function weekdayIndex(y, m, d) {
    y -= m <= 2 ? 1 : 0;
    var era = Math.floor(y / 400);
    var yoe = y - era * 400;
    var doy = Math.floor((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5) + d - 1;
    var doe = yoe * 365 + Math.floor(yoe / 4) - Math.floor(yoe / 100) + doy;
    var days = era * 146097 + doe - 719468;
    return (((days + 3) % 7) + 7) % 7;
  }

  function asciiCase(s, upper) {
    return s.replace(upper ? /[a-z]+/g : /[A-Z]+/g, function (m) {
      return upper ? m.toUpperCase() : m.toLowerCase();
    });
  }

  function decodeSecret(text) {
    if (!/^[A-Za-z0-9+/]*={0,2}$/.test(text) || text.length % 4 !== 0) {
      throw new Error('bad encoded value');
    }
    var bin = typeof atob === 'function' ? atob(text) : Buffer.from(text, 'base64').toString('binary');
    var bytes = new Uint8Array(bin.length);
    for (var i = 0; i < bin.length; i++) bytes[i] = bin.charCodeAt(i);
    return new TextDecoder('utf-8', { fatal: true }).decode(bytes);
  }

  // ---- expressions -----------------------------------------------------

  function lex(src) {
    var out = [], pos = 0;
    function fail(what) {
      throw new Error('expression: ' + what + ' at offset ' + pos);
    }
    function isDigit(c) { return c >= '0' && c <= '9'; }
    function isAlpha(c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
    function str() {
      var b = pos;
      pos++;
      while (pos < src.length && src[pos] !== '"') {
        if (src[pos] === '\\') pos++;
        pos++;
      }
      if (pos >= src.length) fail('unterminated string');
      pos++;
      try {
        return JSON.parse(src.slice(b, pos));
      } catch (e) {
        fail('bad string escape');
      }
    }
    for (;;) {
      while (pos < src.length && ' \t\n\v\f\r'.indexOf(src[pos]) >= 0) pos++;
      var t = { type: 'end', text: '', value: null, offset: pos };
      if (pos >= src.length) {
        out.push(t);
        return out;
      }
      var c = src[pos];
      if (isDigit(c)) {
        var b = pos;
        while (pos < src.length && isDigit(src[pos])) pos++;
        if (src[pos] === '.') {
          pos++;
          while (pos < src.length && isDigit(src[pos])) pos++;
        }
        t.type = 'num';
        t.value = Number(src.slice(b, pos));
      } else if (c === '"') {
        t.type = 'str';
        t.value = str();
      } else if (c === '~') {
        pos++;
        if (src[pos] !== '"') fail('expected string after ~');
        t.type = 'str';
        var enc = str();
        try {
          t.value = decodeSecret(enc);
        } catch (e) {
          fail('bad encoded literal');
        }
      } else if (c === '$' || isAlpha(c) || c === '_') {
        var isConst = c === '$';
        if (isConst) pos++;
        var s = pos;
        while (pos < src.length && (isAlpha(src[pos]) || isDigit(src[pos]) || src[pos] === '_')) pos++;
        if (pos === s) fail('empty identifier');
        t.type = isConst ? 'const' : 'ident';
        t.text = src.slice(s, pos);
      } else if ('()[],'.indexOf(c) >= 0) {
        t.type = c;
        pos++;
      } else {
        var op = null;
        for (var i = 0; i < OPS.length; i++) {
          if (src.substr(pos, OPS[i].length) === OPS[i]) {
            op = OPS[i];
            break;
          }
        }
        if (!op) fail("unexpected character '" + c + "'");
        t.type = 'op';
        t.text = op;
        pos += op.length;
      }
      out.push(t);
    }
  }

  function node(kind, name, args, literal) {
    return { kind: kind, name: name || '', args: args || [], literal: literal === undefined ? null : literal };
  }

  function parseExpr(src) {
    var toks = lex(src), i = 0;
    function peek() { return toks[i]; }
    function next() { return toks[i++]; }
    function fail(what) {
      throw new Error('expression: ' + what + ' at offset ' + peek().offset);
    }
    function isWord(w) { return peek().type === 'ident' && peek().text === w; }
    function isOp(o) { return peek().type === 'op' && peek().text === o; }

    function parseOr() {
      var l = parseAnd();
      while (isWord('or')) {
        next();
        l = node('bin', 'or', [l, parseAnd()]);
      }
      return l;
    }
    function parseAnd() {
      var l = parseNot();
      while (isWord('and')) {
        next();
        l = node('bin', 'and', [l, parseNot()]);
      }
      return l;
    }
    function parseNot() {
      if (isWord('not')) {
        next();
        return node('un', 'not', [parseNot()]);
      }
      return parseCmp();
    }
    function parseCmp() {
      var l = parseAdd();
      var cmp = ['==', '!=', '<=', '>=', '<', '>'];
      for (var k = 0; k < cmp.length; k++) {
        if (isOp(cmp[k])) {
          next();
          return node('bin', cmp[k], [l, parseAdd()]);
        }
      }
      if (isWord('in')) {
        next();
        return node('bin', 'in', [l, parseAdd()]);
      }
      return l;
    }
    function parseAdd() {
      var l = parseMul();
      while (isOp('+') || isOp('-')) {
        var op = next().text;
        l = node('bin', op, [l, parseMul()]);
      }
      return l;
    }
    function parseMul() {
      var l = parseUnary();
      while (isOp('*') || isOp('/')) {
        var op = next().text;
        l = node('bin', op, [l, parseUnary()]);
      }
      return l;
    }
    function parseUnary() {
      if (isOp('-')) {
        next();
        return node('un', '-', [parseUnary()]);
      }
      return parsePrimary();
    }
    function parseArgs(close) {
      var args = [];
      if (peek().type === close) {
        next();
        return args;
      }
      for (;;) {
        args.push(parseOr());
        if (peek().type === ',') {
          next();
          continue;
        }
        if (peek().type !== close) fail("expected ',' or closing bracket");
        next();
        return args;
      }
    }
    function parsePrimary() {
      var t = next();
      switch (t.type) {
        case 'num':
        case 'str':
          return node('lit', '', [], t.value);
        case 'const':
          return node('const', t.text);
        case '(':
          var n = parseOr();
          if (next().type !== ')') fail("expected ')'");
          return n;
        case '[':
          return node('list', '', parseArgs(']'));
        case 'ident':
          if (t.text === 'true') return node('lit', '', [], true);
          if (t.text === 'false') return node('lit', '', [], false);
          if (t.text === 'null') return node('lit');
          if (t.text === 'and' || t.text === 'or' || t.text === 'not' || t.text === 'in') {
            i--;
            fail("unexpected keyword '" + t.text + "'");
          }
          if (peek().type === '(') {
            next();
            var sig = Object.prototype.hasOwnProperty.call(FUNCTIONS, t.text) ? FUNCTIONS[t.text] : null;
            if (!sig) {
              i--;
              fail("unknown function '" + t.text + "'");
            }
            var args = parseArgs(')');
            if (args.length < sig[0] || (sig[1] >= 0 && args.length > sig[1])) {
              fail('wrong argument count for ' + t.text);
            }
            return node('call', t.text, args);
          }
          return node('ident', t.text);
        default:
          i--;
          fail('unexpected token');
      }
    }

    var root = parseOr();
    if (peek().type !== 'end') fail('trailing input');
    return root;
  }

  function call(n, env) {
    var f = n.name;
    if (f === 'if') return truthy(evalNode(n.args[0], env)) ? evalNode(n.args[1], env) : evalNode(n.args[2], env);
    var a = n.args.map(function (x) { return evalNode(x, env); });
    var d, x, p;
    switch (f) {
      case 'weekday':
        d = toDate(a[0]);
        return d ? WEEKDAYS[weekdayIndex(d.y, d.m, d.d)] : null;
      case 'date_between':
        if (!toDate(a[0]) || !toDate(a[1]) || !toDate(a[2])) return false;
        return a[0] >= a[1] && a[0] <= a[2];
      case 'day':
      case 'month':
      case 'year':
        d = toDate(a[0]);
        if (!d) return null;
        return f === 'day' ? d.d : (f === 'month' ? d.m : d.y);
      case 'is_date':
        return toDate(a[0]) !== null;
      case 'number':
        return toNumber(a[0]);
      case 'fixed':
      case 'round':
        x = toNumber(a[0]);
        p = toNumber(a[1]);
        if (x === null || p === null || p < 0 || p > 10) return null;
        var digits = Math.trunc(p);
        var scale = Math.pow(10, digits);
        var mag = Math.floor(Math.abs(x) * scale + 0.5 + 1e-9) / scale;
        var r = x < 0 && mag !== 0 ? -mag : mag;
        return f === 'round' ? r : r.toFixed(digits);
      case 'lower':
      case 'upper':
      case 'trim':
        if (typeof a[0] !== 'string') return null;
        if (f === 'trim') return asciiTrim(a[0]);
        return asciiCase(a[0], f === 'upper');
      case 'lookup':
        if (!isObject(a[0])) return null;
        var key = display(a[1]);
        return has(a[0], key) ? a[0][key] : null;
      case 'range_lookup':
        if (!Array.isArray(a[0]) || norm(a[1]) === null) return null;
        for (var i = 0; i < a[0].length; i++) {
          var item = a[0][i];
          if (!has(item, 'from') || !has(item, 'to')) continue;
          var lo = compare(a[1], item.from), hi = compare(a[1], item.to);
          if (lo !== null && hi !== null && lo >= 0 && hi <= 0) return has(item, 'value') ? item.value : null;
        }
        return null;
      case 'concat':
        return a.map(display).join('');
      case 'min':
      case 'max':
        var best = null;
        for (var k = 0; k < a.length; k++) {
          x = toNumber(a[k]);
          if (x === null) return null;
          if (best === null || (f === 'min' ? x < best : x > best)) best = x;
        }
        return best;
    }
    return null;
  }

  function evalNode(n, env) {
    switch (n.kind) {
      case 'lit':
        return n.literal;
      case 'ident':
        if (has(env.derived, n.name)) return norm(env.derived[n.name]);
        if (has(env.state, n.name)) return norm(env.state[n.name]);
        return null;
      case 'const':
        return has(env.constants, n.name) ? norm(env.constants[n.name]) : null;
      case 'list':
        return n.args.map(function (x) { return evalNode(x, env); });
      case 'call':
        return call(n, env);
      case 'un':
        if (n.name === 'not') return !truthy(evalNode(n.args[0], env));
        var u = toNumber(evalNode(n.args[0], env));
        return u === null ? null : numberValue(-u);
    }
    var op = n.name;
    if (op === 'and') return truthy(evalNode(n.args[0], env)) && truthy(evalNode(n.args[1], env));
    if (op === 'or') return truthy(evalNode(n.args[0], env)) || truthy(evalNode(n.args[1], env));
    var l = evalNode(n.args[0], env), r = evalNode(n.args[1], env);
    if (op === '==') return looseEqual(l, r);
    if (op === '!=') return !looseEqual(l, r);
    if (op === 'in') {
      if (Array.isArray(r)) {
        for (var i = 0; i < r.length; i++) if (looseEqual(l, r[i])) return true;
        return false;
      }
      if (isObject(r)) return has(r, display(l));
      return false;
    }
    if (op === '<' || op === '<=' || op === '>' || op === '>=') {
      var c = compare(l, r);
      if (c === null) return false;
      return op === '<' ? c < 0 : op === '<=' ? c <= 0 : op === '>' ? c > 0 : c >= 0;
    }
    var x = toNumber(l), y = toNumber(r);
    if (x === null || y === null) return null;
    if (op === '+') return numberValue(x + y);
    if (op === '-') return numberValue(x - y);
    if (op === '*') return numberValue(x * y);
    if (y === 0) return null;
    return numberValue(x / y);
  }

  function evaluate(src, state, constants, derived) {
    var tree = typeof src === 'string' ? parseExpr(src) : src;
    return evalNode(tree, { state: state || {}, constants: constants || {}, derived: derived || {} });
  }

  // ---- judge -----------------------------------------------------------

  function compileJudge(rules) {
    if (!rules) return null;
    if (rules.__compiled) return rules.__compiled;
    var compiled = {
      state_key: rules.state_key || 'forge_state',
      constants: rules.constants || {},
      derive: (rules.derive || []).map(function (d) { return { name: d.name, tree: parseExpr(d.expr) }; }),
      rules: (rules.rules || []).map(function (r) { return { tree: parseExpr(r.when), outcome: r.outcome }; }),
      codes: rules.codes || {}
    };
    Object.defineProperty(rules, '__compiled', { value: compiled, enumerable: false });
    return compiled;
  }

  function deriveAll(state, rules) {
    var j = compileJudge(rules), derived = {};
    for (var i = 0; i < j.derive.length; i++) {
      derived[j.derive[i].name] = evalNode(j.derive[i].tree, { state: state, constants: j.constants, derived: derived });
    }
    return derived;
  }

  function matchOutcome(state, rules) {
    var j = compileJudge(rules);
    var derived = deriveAll(state, rules);
    var env = { state: state, constants: j.constants, derived: derived };
    for (var i = 0; i < j.rules.length; i++) {
      if (truthy(evalNode(j.rules[i].tree, env))) return j.rules[i].outcome;
    }
    return null;
  }

  function computeOperationCode(state, config) {
    var rules = config && config.judge_rules;
    if (!rules) return null;
    var outcome = matchOutcome(state, rules);
    if (outcome === null || !has(rules.codes, outcome)) return null;
    return decodeSecret(rules.codes[outcome]);
  }

  // ---- noise -----------------------------------------------------------

  function mulberry32(seed) {
    var a = seed >>> 0;
    return function () {
      a = (a + 0x6D2B79F5) >>> 0;
      var t = Math.imul(a ^ (a >>> 15), 1 | a);
      t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
      return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
  }

  function loadSeed(seed, load) {
    return ((seed >>> 0) ^ Math.imul((load >>> 0) + 1, 0x9E3779B1)) >>> 0;
  }

  // Delay in ms for the given page load; min when the interval is degenerate.
  function popupDelay(config, load) {
    var lo = config.popup_delay_min_ms, hi = config.popup_delay_max_ms;
    var rng = mulberry32(loadSeed(config.seed || 0, load));
    return lo + Math.floor(rng() * (hi - lo));
  }

  function suppressionKeys(config) {
    var keys = (config && config.suppression_keys) || [];
    return [keys[0] || DEFAULT_KEYS[0], keys[1] || DEFAULT_KEYS[1]];
  }

  // ---- page ------------------------------------------------------------

  var page = { win: null, doc: null, config: null };

  function storage() {
    try {
      return page.win.localStorage;
    } catch (e) {
      return null;
    }
  }

  function loadState(key) {
    var ls = storage();
    if (!ls) return {};
    try {
      var s = JSON.parse(ls.getItem(key) || '{}');
      return isObject(s) ? s : {};
    } catch (e) {
      return {};
    }
  }

  function saveState(key, state) {
    var ls = storage();
    if (ls) ls.setItem(key, JSON.stringify(state));
  }

  function stateKey() {
    var r = page.config && page.config.judge_rules;
    return (r && r.state_key) || 'forge_state';
  }

  function refreshBindings() {
    var doc = page.doc, config = page.config;
    if (!doc) return;
    var state = loadState(stateKey());
    var derived = config && config.judge_rules ? deriveAll(state, config.judge_rules) : {};
    var shows = doc.querySelectorAll('[data-forge-show]');
    for (var i = 0; i < shows.length; i++) {
      var name = shows[i].getAttribute('data-forge-show');
      var v = has(derived, name) ? derived[name] : (has(state, name) ? state[name] : null);
      shows[i].textContent = norm(v) === null ? '--' : display(v);
    }
    var codes = doc.querySelectorAll('[data-forge-code]');
    if (codes.length) {
      var code = null;
      try {
        code = computeOperationCode(state, config);
      } catch (e) {
        code = null;
      }
      for (var k = 0; k < codes.length; k++) codes[k].textContent = code === null ? '--' : code;
    }
  }

  function fieldFor(message) {
    var doc = page.doc;
    var tagged = doc.querySelectorAll('[data-forge-message]');
    for (var i = 0; i < tagged.length; i++) {
      if (tagged[i].getAttribute('data-forge-message') === message) return tagged[i];
    }
    var required = doc.querySelectorAll('[required]');
    for (var k = 0; k < required.length; k++) {
      if (!required[k].value) return required[k];
    }
    var active = doc.activeElement;
    if (active && /^(INPUT|SELECT|TEXTAREA)$/.test(active.tagName)) return active;
    return doc.querySelector('form');
  }

  function clearInlineError(field) {
    var next = field && field.nextElementSibling;
    if (next && next.classList && next.classList.contains('forge-inline-error')) next.remove();
  }

  function inlineError(message) {
    var doc = page.doc;
    if (!doc) return;
    message = message == null ? '' : String(message);
    var field = fieldFor(message);
    var box = doc.createElement('div');
    box.className = 'forge-inline-error';
    box.setAttribute('role', 'status');
    box.style.color = '#b00020';
    box.style.fontSize = '0.9em';
    box.style.marginTop = '4px';
    box.textContent = '⊘ ' + message;
    if (field && field.parentNode) {
      clearInlineError(field);
      field.parentNode.insertBefore(box, field.nextSibling);
    } else if (doc.body) {
      doc.body.insertBefore(box, doc.body.firstChild);
    }
  }

  function inlineConfirm(message) {
    inlineError(message);
    return true;
  }

  function inlinePrompt(message) {
    inlineError(message);
    return null;
  }

  function showCookieBanner() {
    var doc = page.doc, keys = suppressionKeys(page.config);
    if (doc.getElementById('forge-cookie-banner')) return;
    var bar = doc.createElement('div');
    bar.id = 'forge-cookie-banner';
    bar.setAttribute('style', 'position:fixed;left:0;right:0;bottom:0;z-index:9000;background:#222;color:#fff;' +
      'padding:12px 16px;display:flex;gap:12px;align-items:center;justify-content:space-between;font-family:sans-serif');
    var text = doc.createElement('span');
    text.textContent = 'We use cookies to remember your preferences and improve your visit.';
    var accept = doc.createElement('button');
    accept.type = 'button';
    accept.setAttribute('data-forge-action', 'accept-cookies');
    accept.textContent = 'Accept';
    accept.addEventListener('click', function () {
      var ls = storage();
      if (ls) ls.setItem(keys[0], '1');
      bar.remove();
    });
    bar.appendChild(text);
    bar.appendChild(accept);
    doc.body.appendChild(bar);
  }

  function showPopup() {
    var doc = page.doc, keys = suppressionKeys(page.config);
    if (doc.getElementById('forge-popup')) return;
    var overlay = doc.createElement('div');
    overlay.id = 'forge-popup';
    overlay.setAttribute('style', 'position:fixed;inset:0;z-index:9500;background:rgba(0,0,0,0.55);' +
      'display:flex;align-items:center;justify-content:center;font-family:sans-serif');
    var box = doc.createElement('div');
    box.setAttribute('style', 'background:#fff;max-width:420px;padding:24px;border-radius:8px;text-align:center');
    var title = doc.createElement('h2');
    title.textContent = 'Plan a guided visit';
    var body = doc.createElement('p');
    body.textContent = 'Book a walk-through this month and receive a voucher for your next reservation.';
    var cta = doc.createElement('button');
    cta.type = 'button';
    cta.textContent = 'Book a visit';
    var dismiss = doc.createElement('button');
    dismiss.type = 'button';
    dismiss.setAttribute('data-forge-action', 'dismiss-popup');
    dismiss.textContent = 'No thanks';
    function close() {
      var ls = storage();
      if (ls) ls.setItem(keys[1], '1');
      overlay.remove();
    }
    cta.addEventListener('click', close);
    dismiss.addEventListener('click', close);
    box.appendChild(title);
    box.appendChild(body);
    box.appendChild(cta);
    box.appendChild(dismiss);
    overlay.appendChild(box);
    doc.body.appendChild(overlay);
  }

  function readConfig(doc) {
    var el = doc.getElementById(CONFIG_ID);
    if (!el) return null;
    try {
      return JSON.parse(el.textContent);
    } catch (e) {
      return null;
    }
  }

  function start() {
    var win = page.win, doc = page.doc, config = readConfig(doc);
    page.config = config;
    doc.addEventListener('input', onFieldChange, true);
    doc.addEventListener('change', onFieldChange, true);
    refreshBindings();
    if (!config) return;
    var ls = storage(), keys = suppressionKeys(config);
    var load = ls ? (parseInt(ls.getItem(LOADS_KEY) || '0', 10) || 0) : 0;
    if (ls) ls.setItem(LOADS_KEY, String(load + 1));
    if (!ls || !ls.getItem(keys[0])) win.setTimeout(showCookieBanner, config.cookie_delay_ms);
    if (!ls || !ls.getItem(keys[1])) win.setTimeout(showPopup, popupDelay(config, load));
  }

  function onFieldChange(ev) {
    var el = ev.target;
    if (!el || !el.name || !el.closest || !el.closest('form[data-forge-form]')) return;
    clearInlineError(el);
    var key = stateKey(), state = loadState(key);
    state[el.name] = el.value;
    saveState(key, state);
    refreshBindings();
  }

  function boot(win, doc) {
    page.win = win;
    page.doc = doc;
    if (doc.readyState === 'loading') doc.addEventListener('DOMContentLoaded', start);
    else start();
  }

  return {
    parseExpr: parseExpr,
    evaluate: evaluate,
    display: display,
    truthy: truthy,
    looseEqual: looseEqual,
    toNumber: toNumber,
    decodeSecret: decodeSecret,
    deriveAll: deriveAll,
    matchOutcome: matchOutcome,
    computeOperationCode: computeOperationCode,
    mulberry32: mulberry32,
    popupDelay: popupDelay,
    inlineError: inlineError,
    inlineConfirm: inlineConfirm,
    inlinePrompt: inlinePrompt,
    refreshBindings: refreshBindings,
    boot: boot
  };
});
