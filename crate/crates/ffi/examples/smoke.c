/* Runs a scenario through the C API and prints S1's convergence time. */
#include <stdio.h>

#include "abrsim.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: %s scenario.scn\n", argv[0]);
        return 2;
    }
    AbrScenario *scenario = NULL;
    if (abr_scenario_load(argv[1], &scenario) != ABR_STATUS_OK) {
        fprintf(stderr, "load: %s\n", abr_last_error());
        return 1;
    }
    abr_scenario_set_algorithm(scenario, 7);
    abr_scenario_set_horizon(scenario, 0.05);

    AbrRun *run = NULL;
    AbrStatus st = abr_run(scenario, &run);
    abr_scenario_free(scenario);
    if (st != ABR_STATUS_OK) {
        fprintf(stderr, "run: %s\n", abr_last_error());
        return 1;
    }
    size_t n = 0;
    abr_run_source_count(run, &n);
    for (size_t i = 0; i < n; i++) {
        const char *name = NULL;
        abr_run_source_name(run, i, &name);
        double t = 0.0;
        if (abr_run_convergence_time(run, name, 0.1, &t) == ABR_STATUS_OK) {
            printf("%s converged at %.6f s\n", name, t);
        } else {
            printf("%s: %s\n", name, abr_last_error());
        }
    }
    uint64_t q = 0;
    abr_run_max_queue(run, &q);
    printf("max queue %llu cells\n", (unsigned long long)q);
    abr_run_free(run);
    return 0;
}
