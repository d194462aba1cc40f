from services.gradcheck.finite_diff import (
    GradCheckReport,
    ObjectiveSweep,
    check_gradient,
    compare_gradients,
    finite_diff_gradient,
    nondifferentiable_reason,
    sweep_gradients,
)
from services.gradcheck.gradnorm_laws import (
    GradNormCheck,
    LawSweepReport,
    angle_pair_gradient,
    cosine_pair_gradient,
    gradnorm_curve,
    law_sweep,
    verify_angular_gradnorm_law,
    verify_cosine_gradnorm_law,
    write_gradnorm_curve,
)
