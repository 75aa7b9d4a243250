"""Re-render report.html for a finished run from its CSV artifacts.
Useful after changing the template; no simulation is repeated.

    python tools/generate_report_local.py runs/demo
"""
from pathlib import Path
import json
import sys

# Ensure project root is on sys.path so local packages (app/) can be imported
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from app.api.analysis import metric_bundle  # noqa: E402
from app.api.reporting import read_trajectory_csv, render_html_report  # noqa: E402

RUN = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/demo")

if not RUN.exists():
    print("run directory not found", RUN)
    raise SystemExit(2)

csvs = sorted(RUN.glob("*/trajectory.csv")) or sorted(RUN.glob("trajectory.csv"))
if not csvs:
    print("no trajectory.csv under", RUN)
    raise SystemExit(2)

metrics = {}
steps = 0
for path in csvs:
    name = path.parent.name if path.parent != RUN else "run"
    traj = read_trajectory_csv(path)
    metrics[name] = metric_bundle(traj, t_start=min(5.0, 0.5 * float(traj.times[-1])))
    steps = len(traj)

certificate = None
cert_path = RUN / "certificate.json"
if cert_path.exists():
    certificate = json.loads(cert_path.read_text(encoding="utf-8"))

summary = {
    "n": traj.n,
    "steps": steps,
    "h": float(traj.times[1] - traj.times[0]),
    "seed": "see manifest.json",
    "controllers": list(metrics),
}
OUT = RUN / "report_local.html"
OUT.write_text(render_html_report(summary, metrics, certificate=certificate), encoding="utf-8")
print("Wrote", OUT)
