"""The generalized Erdelyi-Kober operator and the RL scaling identity it satisfies."""
from fracsym import diffusion as d
from fracsym.parse import parse

f = parse("exp(-z)")
print("EK[mu=0.5, z=0.5] exp(-z) at z=1:", d.ek_operator(f, 0.5, {"z": 0.5}, {"z": 1.0}))

g = parse("exp(-z)")
lhs, rhs = d.ek_scaling_identity(g, alpha=0.5, p=0.5, t=1.2, x=0.8)
print(f"RL side {lhs:.12f}  EK side {rhs:.12f}  difference {abs(lhs - rhs):.1e}")
