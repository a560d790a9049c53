#include <math.h>
#include <stdio.h>
#include <string.h>

#include "hocbf.h"

#define CHECK(cond)                                                  \
    do {                                                             \
        if (!(cond)) {                                               \
            char msg[512] = {0};                                     \
            hocbf_last_error(msg, sizeof msg);                       \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond, msg); \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    HocbfScenario *s = NULL;
    CHECK(hocbf_scenario_builtin("example1_no_circ", &s) == HOCBF_STATUS_OK);
    CHECK(hocbf_scenario_set_timing(s, 0.01, 1.0) == HOCBF_STATUS_OK);

    HocbfRollout *r = NULL;
    CHECK(hocbf_run(s, &r) == HOCBF_STATUS_OK);
    size_t steps = 0, nq = 0, nv = 0;
    CHECK(hocbf_rollout_dims(r, &steps, &nq, &nv) == HOCBF_STATUS_OK);
    CHECK(steps == 101 && nq == 2 && nv == 2);

    double t = -1.0, q[2], v[2], h = 0.0;
    CHECK(hocbf_rollout_step(r, steps - 1, &t, q, 2, v, 2, &h) == HOCBF_STATUS_OK);
    CHECK(fabs(t - 1.0) < 1e-12 && h > 0.0);

    size_t needed = 0;
    CHECK(hocbf_rollout_summary_json(r, NULL, 0, &needed) == HOCBF_STATUS_BAD_LENGTH);
    char summary[4096];
    CHECK(needed <= sizeof summary);
    CHECK(hocbf_rollout_summary_json(r, summary, sizeof summary, NULL) == HOCBF_STATUS_OK);
    CHECK(strstr(summary, "\"scenario\":\"example1_no_circ\"") != NULL);

    HocbfScenario *bad = NULL;
    CHECK(hocbf_scenario_from_json("{", &bad) == HOCBF_STATUS_INVALID_ARGUMENT);
    CHECK(bad == NULL && hocbf_last_error(NULL, 0) > 1);

    hocbf_rollout_free(r);
    hocbf_scenario_free(s);
    printf("hocbf %s ok\n", hocbf_version());
    return 0;
}
