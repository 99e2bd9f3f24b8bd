//! Matplotlib scripts written next to the CSV outputs.

const PREAMBLE: &str = "#!/usr/bin/env python3\nimport sys\nimport numpy as np\nimport matplotlib\nif '--show' not in sys.argv:\n    matplotlib.use('Agg')\nimport matplotlib.pyplot as plt\n";

fn finish(png: &str) -> String {
    format!("plt.tight_layout()\nif '--show' in sys.argv:\n    plt.show()\nelse:\n    plt.savefig('{png}', dpi=150)\n")
}

pub fn trace_script(csv: &str, title: &str) -> String {
    format!(
        "{PREAMBLE}
d = np.loadtxt('{csv}', delimiter=',', comments='#', skiprows=1)
t, s = d[:, 0], d[:, 3]
fig, ax = plt.subplots(figsize=(9, 4))
ax.plot(t, s / s.max(), lw=0.8)
ax.set_xlabel('probe delay (ps)')
ax.set_ylabel('normalized CARS signal')
ax.set_title({title:?})
{}",
        finish(&csv.replace(".csv", ".png"))
    )
}

pub fn spectrum_script(csv: &str) -> String {
    format!(
        "{PREAMBLE}
d = np.loadtxt('{csv}', delimiter=',', comments='#', skiprows=1)
w, a = d[:, 0], d[:, 3]
fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(w, a / a.max())
ax.set_xlabel('Raman shift (cm$^{{-1}}$)')
ax.set_ylabel('|A$_2$| (normalized)')
{}",
        finish(&csv.replace(".csv", ".png"))
    )
}

pub fn husimi_script(csv: &str) -> String {
    format!(
        "{PREAMBLE}
raw = np.loadtxt('{csv}', delimiter=',', comments='#', dtype=str)
t = raw[0, 1:].astype(float)
w = raw[1:, 0].astype(float)
q = raw[1:, 1:].astype(float)
fig, ax = plt.subplots(figsize=(6, 5))
ax.pcolormesh(t, w, q, shading='auto')
ax.set_xlabel('time (fs)')
ax.set_ylabel('frequency (cm$^{{-1}}$)')
{}",
        finish(&csv.replace(".csv", ".png"))
    )
}

pub fn fit_script(data_csv: &str, fit_csv: &str) -> String {
    format!(
        "{PREAMBLE}
d = np.loadtxt('{fit_csv}', delimiter=',', comments='#', skiprows=1)
fig, ax = plt.subplots(figsize=(9, 4))
ax.plot(d[:, 0], d[:, 1], '.', ms=2, label='data ({data_csv})')
ax.plot(d[:, 0], d[:, 2], lw=0.8, label='fit')
ax.set_xlabel('probe delay (ps)')
ax.set_ylabel('signal')
ax.legend()
{}",
        finish(&fit_csv.replace(".csv", ".png"))
    )
}
