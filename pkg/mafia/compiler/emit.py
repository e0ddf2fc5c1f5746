"""
IR emitters: canonical JSON and P4-16-flavoured pseudo code
"""
import json

import jinja2

from ..core.expr import Cell, FieldRef, Lit, Not, Temp, to_source
from .ir import (
    ALU, DUPLICATE, EMIT, ESTIMATE, HLL_UPDATE, INIT, PCSA_UPDATE, READ, RESET, SERIALIZE, UPDATE,
    Apply, SeqNode, ir_from_json, ir_to_json,
)

BACKENDS = ('json', 'pseudo-p4')


def emit_json(ir):
    return json.dumps(ir_to_json(ir), indent=2, sort_keys=True) + '\n'


def parse_json(text):
    return ir_from_json(json.loads(text))


def _operand(e):
    if isinstance(e, Temp):
        return f'meta.{e.name}'
    if isinstance(e, FieldRef):
        return f'hdr.{e.name}' if not e.name.startswith(('pkt.', 'switch.')) else f'meta.{e.name.replace(".", "_")}'
    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, Cell):
        return 'value'
    return to_source(e)


def _statement(atom):
    kind = atom.kind
    dst = _operand(atom.dst) if atom.dst is not None else None
    if kind == ALU:
        args = [_operand(a) for a in atom.args]
        if atom.op == 'move':
            return f'{dst} = {args[0]};'
        if atom.op == '!':
            return f'{dst} = (bit<64>)(!{args[0]});'
        if atom.op == 'random':
            return f'random({dst}, {args[0]}, {args[1]} - 1);'
        if atom.op in ('min', 'max'):
            cmp = '<' if atom.op == 'min' else '>'
            return f'{dst} = ({args[0]} {cmp} {args[1]}) ? {args[0]} : {args[1]};'
        return f'{dst} = {args[0]} {atom.op} {args[1]};'
    if kind == READ:
        return f'{dst} = {atom.var}_row{atom.row}.read();'
    if kind == UPDATE:
        return f'{atom.var}_row{atom.row}.execute(/* value = {_operand_expr(atom.expr)} */);'
    if kind == RESET:
        return f'{atom.var}.clear();'
    if kind == INIT:
        return f'{atom.var}.init({_operand(atom.args[0])});'
    if kind == SERIALIZE:
        return f'{dst} = {atom.var}.serialize();'
    if kind == ESTIMATE:
        return f'{dst} = {atom.var}.estimate();'
    if kind in (PCSA_UPDATE, HLL_UPDATE):
        return f'{atom.var}.{kind}();'
    if kind == DUPLICATE:
        return f'clone_to_stream(STREAM_{atom.target.upper()});'
    if kind == EMIT:
        return f'emit_to(ENDPOINT_{atom.target.upper()});'
    raise ValueError(f'unknown atom kind {kind!r}')


def _operand_expr(e):
    if isinstance(e, (Lit, FieldRef, Temp, Cell)):
        return _operand(e)
    if isinstance(e, Not):
        return f'!({_operand_expr(e.operand)})'
    return f'({_operand_expr(e.left)} {e.op} {_operand_expr(e.right)})'


def _control_lines(node, ir, indent):
    pad = '    ' * indent
    if isinstance(node, Apply):
        t = ir.table(node.table)
        if t.guard is None:
            return [f'{pad}{t.name}.apply();']
        return [f'{pad}{t.name}.apply();', f'{pad}if ({_operand(t.guard)} == 0) {{ return; }}']
    if isinstance(node, SeqNode):
        return [line for item in node.items for line in _control_lines(item, ir, indent)]
    lines = []
    for index, branch in enumerate(node.branches):
        lines.append(f'{pad}// parallel branch {index + 1}')
        lines.extend(_control_lines(branch, ir, indent))
    return lines


P4_TEMPLATE = jinja2.Template('''\
/*
 * Generated pseudo-P4 (P4-16 flavoured). NOT validated by any vendor
 * compiler; for reading only.
{% if role %} * role: {{ role }}
{% endif %}{% if report %} * stages: {{ report.depth }}, widest stage: {{ report.width }} atoms, atoms: {{ report.atoms }}
{% endif %} */

{% for r in registers %}
register<bit<{{ r.cell_bits }}>>({{ r.cells }}) {{ r.name }};  // {{ r.kind }}, shape {{ r.shape }}
{% endfor %}

control Measurement(inout headers hdr, inout metadata meta) {
{% for t in tables %}
    action {{ t.name }}_act() {
{% for s in t.statements %}
        {{ s }}
{% endfor %}
    }
    table {{ t.name }} {
        actions = { {{ t.name }}_act; }
        default_action = {{ t.name }}_act();
    }
{% endfor %}

    apply {
{% for stream, lines in control %}
        if (meta.stream == STREAM_{{ stream | upper }}) {
{% for line in lines %}
        {{ line }}
{% endfor %}
        }
{% endfor %}
    }
}
''', trim_blocks=True, lstrip_blocks=True)


def emit_pseudo_p4(ir, report=None):
    registers = []
    for r in ir.registers():
        cells = 1
        for n in r['shape']:
            cells *= n
        registers.append({**r, 'cells': cells})
    tables = [{'name': t.name, 'statements': [_statement(a) for a in t.atoms]} for t in ir.tables]
    control = [(stream, _control_lines(node, ir, 1)) for stream, node in sorted(ir.control.items())]
    return P4_TEMPLATE.render(role=ir.role, report=report, registers=registers, tables=tables, control=control)


def emit(ir, backend='json', report=None):
    if backend == 'json':
        return emit_json(ir)
    if backend == 'pseudo-p4':
        return emit_pseudo_p4(ir, report)
    raise ValueError(f'unknown backend {backend!r} (choose from {", ".join(BACKENDS)})')
