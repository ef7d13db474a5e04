"""Check the Lie symmetries of an anomalous-diffusion equation on an exact solution."""
from fracsym import diffusion as d

spec = d.DiffusionSpec(alpha=(1.0,), beta=(1.0,), p=(0.5,))
sample = d.builtin_sample(spec)
print("equation:", d.equation_json(spec))
print("sample:  ", sample.expr)

for v in d.generators(spec):
    rep = d.symmetry_report(spec, v, sample)
    print(f"{v.name}: max residual {rep['max_residual']:.2e}  pass={rep['pass']}")

rep = d.symmetry_report(spec, d.printed_v3(spec), sample)
print(f"v3 with the opposite sign: max residual {rep['max_residual']:.2e}  pass={rep['pass']}")

for rel in d.check_determining_relations(spec, d.generator(spec, "v3")):
    print(f"  relation {rel.name}: holds={rel.holds}")
