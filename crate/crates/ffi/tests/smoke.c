#include <math.h>
#include <stdio.h>
#include "robust_enkf.h"

int main(void) {
    double a = -1.0, b = 1.0, one = 1.0, x = 2.0, u = 0.0, p = 0.0;
    ReGain *gain = NULL;
    ReSimulator *sim = NULL;
    ReLaw *law = NULL;
    if (re_gain_solve_are(1, 1, &a, &b, &one, &one, &one, &gain) != RE_STATUS_OK) return 1;
    if (re_gain_value_matrix(gain, &p) != RE_STATUS_OK) return 2;
    if (fabs(p - (sqrt(2.0) - 1.0)) > 1e-10) return 3;
    if (re_simulator_new_linear(1, 1, &a, &b, &sim) != RE_STATUS_OK) return 4;
    if (re_law_new(gain, 1, &one, &one, &one, 0.0, 1e-3, 1, &law) != RE_STATUS_OK) return 5;
    if (re_law_control(law, sim, 0.0, &x, &u) != RE_STATUS_OK) return 6;
    if (fabs(u + p * x) > 1e-10) return 7;
    if (re_simulator_new_linear(1, 1, &a, &b, NULL) != RE_STATUS_NULL_POINTER) return 8;
    char msg[64];
    if (re_last_error_message(msg, sizeof msg) == 0) return 9;
    re_law_free(law);
    re_simulator_free(sim);
    re_gain_free(gain);
    printf("ok p=%.12f u=%.12f\n", p, u);
    return 0;
}
