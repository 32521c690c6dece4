COEXACT_TOL = 1e-8
FD_STEP = 1e-5
TAYLOR_STEPS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
TAYLOR_FIRST_ORDER_SLOPE = 1.9
TAYLOR_SECOND_ORDER_SLOPE = 2.9
