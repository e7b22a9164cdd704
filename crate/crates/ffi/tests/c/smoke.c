#include <math.h>
#include <stdio.h>
#include "hybrid_volterra.h"

static const char *PROBLEM =
    "horizon = 1.0\n"
    "x0 = \"1\"\n"
    "f1 = \"x\"\n"
    "G1 = \"1\"\n"
    "tau = [0.5]\n"
    "[quadrature]\n"
    "nodes_per_segment = 64\n";

int main(void) {
    HvProblem *p = NULL;
    if (hv_problem_from_toml(PROBLEM, &p) != HV_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", hv_last_error_message());
        return 1;
    }
    HvSolution *s = NULL;
    if (hv_solve(p, HV_METHOD_SEGMENT, &s) != HV_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", hv_last_error_message());
        return 1;
    }
    double left = 0.0, right = 0.0;
    hv_solution_eval(s, 0.5, &left);
    hv_solution_eval_right(s, 0.5, &right);
    printf("jump %.6f iterations %zu\n", right - left, hv_solution_iterations(s));
    int ok = fabs(right - left - 1.0) < 1e-8 && hv_solution_converged(s);

    HvProblem *bad = NULL;
    ok = ok && hv_problem_from_toml("horizon = 1.0\nf1 = \"x +\"\n", &bad) == HV_STATUS_INVALID_INPUT;
    ok = ok && bad == NULL && hv_last_error_message()[0] != '\0';

    double m[9] = {0.5, 0, 0, 0, 0.2, 0, 0, 0, 0.1};
    HvMatrixReport r;
    ok = ok && hv_check_matrix(m, &r) == HV_STATUS_OK && r.criterion_contractive && fabs(r.spectral_radius - 0.5) < 1e-12;

    hv_solution_free(s);
    hv_problem_free(p);
    return ok ? 0 : 2;
}
