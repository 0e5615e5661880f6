"""
Handing the model to an external solver
=======================================

The embedded solver is for desk-sized models.  Anything bigger goes out as a
CPLEX LP file, which every mainstream solver reads.
"""

import sys
import tempfile
from pathlib import Path

from esmgen import build_model, export_lp, read_lp
from esmgen.scenario import parse_scenario
from esmgen.solver import solve, to_standard_form

here = Path(__file__).resolve().parent
model = build_model(parse_scenario(here / "scenario" / "scenario.txt"))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.lp"
    text = export_lp(model, path)
    print("\n".join(text.splitlines()[:12]))
    print("...")

    # reading the file back gives exactly the same matrices
    print("round trip exact:", read_lp(path).equals(to_standard_form(model)))
    print("embedded optimum:", solve(model).objective_value)

    try:
        import highspy
    except ImportError:
        sys.exit(0)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    print("HiGHS optimum:   ", h.getInfo().objective_function_value)
