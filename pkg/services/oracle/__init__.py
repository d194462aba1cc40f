from services.oracle.tammes_cases import (
    CaseSource,
    TammesCase,
    analytic_cases,
    brute_force_circle,
    cases_frame,
    lookup_case,
    write_cases,
)
