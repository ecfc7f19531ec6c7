#include <stdio.h>
#include <string.h>

#include "evcs.h"

#define CHECK(expr)                                                        \
    do {                                                                   \
        if (!(expr)) {                                                     \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #expr, \
                    evcs_last_error_message());                            \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    EvcsConfig *cfg = NULL;
    CHECK(evcs_config_default(&cfg) == EVCS_STATUS_OK);

    double price = 0.0;
    CHECK(evcs_tariff_purchase_price(cfg, 44, &price) == EVCS_STATUS_OK);
    CHECK(price == 0.179);
    CHECK(evcs_tariff_purchase_price(cfg, 500, &price) == EVCS_STATUS_INVALID_ARGUMENT);
    CHECK(strlen(evcs_last_error_message()) > 0);

    EvcsDispatch d;
    CHECK(evcs_dispatch(50.0, 30.0, 20.0, 7.0, &d) == EVCS_STATUS_OK);
    CHECK(d.ev_ev == 7.0 && d.pv_ev == 13.0 && d.grid_load == 33.0);

    EvcsDayResult *r = NULL;
    CHECK(evcs_run_day(cfg, EVCS_SCHEME_CHARGE_ONLY, 2, NULL, &r) == EVCS_STATUS_OK);
    EvcsDaySummary s;
    CHECK(evcs_day_result_summary(r, &s) == EVCS_STATUS_OK);
    CHECK(s.ev_discharge_kwh == 0.0 && s.violations == 0);

    evcs_day_result_free(r);
    evcs_config_free(cfg);
    printf("ok %.3f\n", s.total_cost_usd);
    return 0;
}
