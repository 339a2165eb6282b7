#include <math.h>
#include <stdio.h>
#include "dalembert.h"

int main(void) {
    DzModel *m = NULL;
    if (dz_model_builtin("harmonic_oscillator", "{\"omega\": 2}", &m) != DZ_STATUS_OK) {
        fprintf(stderr, "%s\n", dz_last_error());
        return 1;
    }
    double q = 0.5, qd = 0.0, qdd = 0.0;
    if (dz_eom_accel(m, &q, &qd, 0.0, &qdd) != DZ_STATUS_OK || fabs(qdd + 2.0) > 1e-14) return 2;
    if (dz_model_builtin("no_such_system", NULL, &m) != DZ_STATUS_INVALID_ARGUMENT) return 3;
    double eps = 1.0, epsd = 0.0;
    DzTrajectory *tr = NULL;
    if (dz_integrate(m, &q, &eps, &qd, &epsd, "{\"method\":\"dopri5\",\"t_end\":1.0}", &tr) != DZ_STATUS_OK) return 4;
    size_t n = dz_trajectory_len(tr);
    double t, q1;
    dz_trajectory_sample(tr, n - 1, &t, &q1, NULL, NULL, NULL);
    dz_trajectory_free(tr);
    dz_model_free(m);
    printf("%.12f %.12f\n", t, q1);
    return fabs(q1 - 0.5 * cos(2.0)) < 1e-8 ? 0 : 5;
}
