namespace curvelab {}
