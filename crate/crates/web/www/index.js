import init, { render_prompts, convert_bio, explore_decoding } from "./pkg/qaner_web.js";

const $ = (id) => document.getElementById(id);

function show(el, f) {
  el.classList.remove("error");
  try {
    return f();
  } catch (e) {
    el.classList.add("error");
    el.textContent = String(e.message ?? e);
  }
}

function renderPrompts() {
  const out = $("prompts-out");
  show(out, () => {
    const set = JSON.parse(render_prompts($("template").value, $("types").value, $("fill").value, $("fivews").checked));
    out.textContent = set.prompts.map((p) => `${p.entity_type}\t${p.question}`).join("\n");
  });
}

function convert() {
  const out = $("convert-out");
  show(out, () => {
    const res = JSON.parse(convert_bio($("bio").value, $("columns").value, $("template").value, $("mode").value));
    out.textContent = JSON.stringify(res.report, null, 2) + "\n\n" + JSON.stringify(JSON.parse(res.squad), null, 2);
  });
}

function cell(text) {
  const td = document.createElement("td");
  td.textContent = text;
  return td;
}

function explore() {
  $("threshold-v").textContent = $("threshold").value;
  $("noise-v").textContent = $("noise").value;
  const out = $("explore-out");
  show(out, () => {
    const res = JSON.parse(
      explore_decoding(
        $("bio").value,
        $("columns").value,
        Number($("threshold").value),
        Number($("nbest").value),
        Number($("noise").value),
        BigInt($("seed").value || 0),
        $("norm").value,
      ),
    );
    $("explore-summary").textContent =
      `micro P ${res.micro_precision.toFixed(3)}  R ${res.micro_recall.toFixed(3)}  F1 ${res.micro_f1.toFixed(3)}`;
    out.replaceChildren();
    for (const r of res.records) {
      const h = document.createElement("h4");
      h.textContent = `${r.entity_type}: ${r.context}`;
      const table = document.createElement("table");
      const head = document.createElement("tr");
      for (const t of ["span", "score", "p_start + p_end"]) {
        const th = document.createElement("th");
        th.textContent = t;
        head.append(th);
      }
      table.append(head);
      for (const c of r.candidates.slice(0, 5)) {
        const tr = document.createElement("tr");
        if (c.accepted) tr.className = "accepted";
        tr.append(cell(c.surface), cell(c.score.toFixed(2)), cell(c.p_sum.toFixed(3)));
        table.append(tr);
      }
      out.append(h, table);
    }
  });
}

await init();
$("render").addEventListener("click", renderPrompts);
$("convert").addEventListener("click", convert);
for (const id of ["threshold", "nbest", "noise", "seed", "norm", "bio", "columns"]) {
  $(id).addEventListener("input", explore);
}
renderPrompts();
explore();
