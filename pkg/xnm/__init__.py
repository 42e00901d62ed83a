# Scene-graph reasoning engine package
