# Penrose identity and reconstruction targets checked by the test-suite.
PENROSE_TOL = 1e-10
SUBSPACE_EQUAL_TOL = 1e-8

# log-log slope fits ignore residuals below this multiple of machine epsilon.
SLOPE_NOISE_FACTOR = 1e3
