"""
hemifss: design automation for a hemispherical multilayer band-pass frequency-selective surface.

Modules, from circuit to measurement:

    tmm_circuit        cascaded two-port model of the C-L-C sheet stack
    element_synth      circuit values <-> unit-cell geometry, L/C synthesis
    goldberg_tess      Goldberg tessellation of the dome and its skirt
    pattern_mapper     per-cell metal artwork, design-rule checks
    artwork_export     geometry-json / svg / triangle-mesh writers
    feed_model         raised-cosine feed and horn q fitting
    gaussian_postproc  Gaussian far-field weighting and time gating
    radome_estimator   ray-based estimate of the curved shell's transmission
    cli                batch pipeline (``python -m hemifss``)
"""

__version__ = "0.1.0"
