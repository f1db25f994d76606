"""Stand up a stub upstream and the scanning proxy, then replay the lockdown sequence.

    python demos/proxy_lockdown.py
"""

from canarykit.corpus import load_corpus
from canarykit.e2e import run_scenario

for step in run_scenario(load_corpus()[3][1], b"demo organisation key"):
    mark = "ok " if step.ok else "BAD"
    print(f"{mark} {step.label:<15} -> {step.status}  {step.detail or ''}")
