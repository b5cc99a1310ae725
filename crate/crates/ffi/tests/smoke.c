#include "kawahara.h"
#include <stdio.h>
#include <string.h>

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            char msg[256];                                            \
            kw_last_error_message(msg, sizeof msg);                   \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond, msg); \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    KwConfig *cfg = NULL;
    CHECK(kw_config_parse("sim.a0 = 1\nspace.N = 48\nsim.dt = 0.002\n", &cfg) == KW_STATUS_OK);
    CHECK(kw_config_set(cfg, "init.amplitude", "0.03") == KW_STATUS_OK);

    KwCondition cond;
    CHECK(kw_config_check_condition(cfg, &cond) == KW_STATUS_OK && cond.holds);

    KwKernel *kernel = NULL;
    CHECK(kw_kernel_from_config(cfg, &kernel) == KW_STATUS_OK);
    double g = 0.0, xi = 0.0;
    CHECK(kw_kernel_eval(kernel, 0.0, &g, NULL, &xi) == KW_STATUS_OK && g > 0.0);
    CHECK(kw_kernel_validate(kernel, 30.0, 2001) == KW_STATUS_OK);
    kw_kernel_free(kernel);

    KwSimulation *sim = NULL;
    CHECK(kw_simulation_new(cfg, &sim) == KW_STATUS_OK);
    KwEnergyRecord r0, r1;
    CHECK(kw_simulation_record(sim, &r0) == KW_STATUS_OK);
    CHECK(kw_simulation_step(sim, 50) == KW_STATUS_OK);
    CHECK(kw_simulation_record(sim, &r1) == KW_STATUS_OK);
    CHECK(r1.e < r0.e);
    kw_simulation_free(sim);

    CHECK(kw_config_set(cfg, "sim.speed", "1") == KW_STATUS_UNKNOWN_KEY);
    CHECK(strcmp(kw_status_name(KW_STATUS_UNKNOWN_KEY), "unknown key") == 0);
    kw_config_free(cfg);
    printf("ok\n");
    return 0;
}
