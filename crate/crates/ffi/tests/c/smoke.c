#include <math.h>
#include <stdio.h>
#include <string.h>

#include "kerrmod.h"

#define CHECK(cond)                                                        \
    do {                                                                   \
        if (!(cond)) {                                                     \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
                    km_last_error_message());                              \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    KmParams p;
    CHECK(km_params_default(&p) == KM_STATUS_OK);
    p.gamma = -1.0;
    CHECK(km_params_validate(&p) == KM_STATUS_INVALID_PARAMETER);
    CHECK(strlen(km_last_error_message()) > 0);

    double t = 0.0;
    CHECK(km_superposition_time(1.0, 0.0, 0.0, 0.0, &t) == KM_STATUS_OK);

    KmDensity *rho = NULL;
    CHECK(km_analytic_density(2.0, 0.0, 1.0, 0.0, 0.0, 0.0, 40, t, &rho) == KM_STATUS_OK);
    CHECK(km_density_dim(rho) == 40);

    double w = 0.0;
    CHECK(km_wigner_point(rho, 0.0, 0.0, &w) == KM_STATUS_OK);
    CHECK(fabs(w) < 2.0 / 3.14159265358979 + 1e-12);

    double n = 0.0, q = 0.0;
    CHECK(km_density_moments(rho, &n, &q) == KM_STATUS_OK);
    CHECK(fabs(n - 4.0) < 1e-9);
    km_density_free(rho);

    printf("ok %s\n", km_version());
    return 0;
}
