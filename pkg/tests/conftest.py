"""Shared fixtures: scripted stand-in engines speaking the request-directory
protocol, exercised without any real dimension-reduction dependency."""

import os
import stat
import textwrap

import numpy as np
import pytest

from drtune import DataMatrix, HyperparamDim, HyperparamSpace, external_engine

# Reads input.csv and params.json from the request directory, writes the first
# d_prime columns (jittered by the seed so repeats differ) as output.csv.
_PROJECT_SCRIPT = """\
#!/usr/bin/env python3
import json, os, sys
import numpy as np

workdir = sys.argv[1]
X = np.loadtxt(os.path.join(workdir, "input.csv"), delimiter=",", ndmin=2)
with open(os.path.join(workdir, "params.json")) as fh:
    params = json.load(fh)
d_prime = int(params["d_prime"])
rng = np.random.default_rng(int(params["seed"]) % 2**32)
Y = X[:, :d_prime] + 1e-6 * rng.standard_normal((X.shape[0], d_prime))
np.savetxt(os.path.join(workdir, "output.csv"), Y, delimiter=",")
"""

# Embedding quality depends on the "alpha" hyperparameter alone: noise is
# smallest at alpha = 0.3, so rank metrics prefer that region and sensitivity
# analysis should attribute variance to alpha rather than beta.
_ALPHA_QUALITY_SCRIPT = """\
#!/usr/bin/env python3
import json, os, sys
import numpy as np

workdir = sys.argv[1]
X = np.loadtxt(os.path.join(workdir, "input.csv"), delimiter=",", ndmin=2)
with open(os.path.join(workdir, "params.json")) as fh:
    params = json.load(fh)
d_prime = int(params["d_prime"])
rng = np.random.default_rng(int(params["seed"]) % 2**32)
scale = 0.02 + 2.0 * abs(float(params["alpha"]) - 0.3)
Y = X[:, :d_prime] + rng.normal(0.0, scale, (X.shape[0], d_prime))
np.savetxt(os.path.join(workdir, "output.csv"), Y, delimiter=",")
"""

_FAIL_SCRIPT = """\
#!/usr/bin/env python3
import sys
sys.stderr.write("synthetic engine failure: bad input\\n")
sys.exit(4)
"""

_TRUNCATED_SCRIPT = """\
#!/usr/bin/env python3
import os, sys
import numpy as np

workdir = sys.argv[1]
X = np.loadtxt(os.path.join(workdir, "input.csv"), delimiter=",", ndmin=2)
np.savetxt(os.path.join(workdir, "output.csv"), X[:-1, :2], delimiter=",")
"""

_NAN_SCRIPT = """\
#!/usr/bin/env python3
import os, sys
import numpy as np

workdir = sys.argv[1]
X = np.loadtxt(os.path.join(workdir, "input.csv"), delimiter=",", ndmin=2)
Y = X[:, :2].copy()
Y[0, 0] = np.nan
np.savetxt(os.path.join(workdir, "output.csv"), Y, delimiter=",")
"""


def _write_script(path, body):
    path.write_text(body)
    path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return str(path)


@pytest.fixture(scope="session")
def stub_scripts(tmp_path_factory):
    """Dict of scripted engine commands keyed by behavior."""
    root = tmp_path_factory.mktemp("engines")
    return {
        "project": _write_script(root / "project.py", _PROJECT_SCRIPT),
        "alpha_quality": _write_script(root / "alpha_quality.py",
                                       _ALPHA_QUALITY_SCRIPT),
        "fail": _write_script(root / "fail.py", _FAIL_SCRIPT),
        "truncated": _write_script(root / "truncated.py", _TRUNCATED_SCRIPT),
        "nan": _write_script(root / "nan.py", _NAN_SCRIPT),
    }


@pytest.fixture()
def stub_space():
    return HyperparamSpace((
        HyperparamDim(name="alpha", kind="continuous", bounds=(0.0, 1.0)),
        HyperparamDim(name="beta", kind="continuous", bounds=(0.0, 2.0)),
    ))


@pytest.fixture()
def project_engine(stub_scripts, stub_space):
    return external_engine("project", stub_space,
                           ("python3", stub_scripts["project"]))


@pytest.fixture()
def small_data():
    rng = np.random.default_rng(42)
    values = rng.normal(size=(12, 4))
    labels = np.arange(12) % 3
    return DataMatrix(values=values, labels=labels)


@pytest.fixture(autouse=True)
def _tmp_request_dirs(tmp_path, monkeypatch):
    """Keep engine request directories under the test's tmp dir."""
    monkeypatch.setenv("DRTUNE_TMP", str(tmp_path))
