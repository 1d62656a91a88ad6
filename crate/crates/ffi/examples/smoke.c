/* Build: cc smoke.c -I../include ../../../target/debug/libmppfl_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "mppfl.h"

int main(void) {
    MppScenario *scenario = NULL;
    if (mpp_scenario_from_str("graph.n = 8\nrun.horizon = 3\n", &scenario) != MPP_STATUS_OK) {
        fprintf(stderr, "config: %s\n", mpp_last_error());
        return 1;
    }
    MppOutcome *outcome = NULL;
    if (mpp_scenario_run(scenario, &outcome) != MPP_STATUS_OK) {
        fprintf(stderr, "run: %s\n", mpp_last_error());
        mpp_scenario_free(scenario);
        return 2;
    }
    double rewards[3];
    double budgets[8];
    MppSummary summary;
    mpp_outcome_rewards(outcome, rewards, 3);
    mpp_outcome_budgets(outcome, 1, budgets, 8);
    mpp_outcome_summary(outcome, &summary);
    printf("r(1) = %.6f, rho_0(1) = %.6f, welfare = %.6f, rounds = %zu\n",
           rewards[0], budgets[0], summary.welfare_mpp, summary.rounds);

    MppScenario *bad = NULL;
    MppStatus status = mpp_scenario_from_str("server.alpha = 1.5", &bad);
    printf("bad config -> %d: %s\n", (int)status, mpp_last_error());

    mpp_outcome_free(outcome);
    mpp_scenario_free(scenario);
    return 0;
}
