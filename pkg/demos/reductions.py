"""Reduce the diffusion equation by its generators and build a similarity solution."""
from fracsym import diffusion as d

spec = d.DiffusionSpec(alpha=(-1.0,), beta=(2.0,), p=(0.5,))
for reduce in (d.reduce_by_v1, d.reduce_by_v2):
    r = reduce(spec)
    print(r.generator, r.variables, "ansatz", r.ansatz)
    print("   ", r.residual_text())

c, lift, reduced = d.similarity_solution_v2(spec)
print("similarity constant c =", c)
print("lifted solution u =", lift)

two = d.DiffusionSpec(alpha=(1.0, 1.0), beta=(1.0, 0.5), p=(0.5, 1.5))
r3 = d.reduce_by_v3(two)
print("v3 reduction:", r3.residual_text())
print("flags:", *r3.flags, sep="\n  ")
