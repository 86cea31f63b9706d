/* cc examples/solve.c -Iinclude -L../../target/release -lpomdp_voi_ffi -o solve */
#include <stdio.h>
#include "pomdp_voi.h"

int main(void) {
    PvModel *model = NULL;
    PvSolution *solution = NULL;
    char msg[256];

    if (pv_model_three_component(0.9, 2, &model) != PV_STATUS_OK) {
        pv_last_error(msg, sizeof msg);
        fprintf(stderr, "model: %s\n", msg);
        return 1;
    }
    PvSolverOptions opts = pv_solver_options_default();
    opts.epsilon = 1.0;
    if (pv_solve(model, &opts, NULL, 0, &solution) != PV_STATUS_OK) {
        pv_last_error(msg, sizeof msg);
        fprintf(stderr, "solve: %s\n", msg);
        pv_model_free(model);
        return 1;
    }
    printf("pomdp-voi %s: %zu states, value in [%.3f, %.3f]\n", pv_version(), pv_model_n_states(model),
           pv_solution_lower(solution), pv_solution_upper(solution));
    pv_solution_free(solution);
    pv_model_free(model);
    return 0;
}
