#include <math.h>
#include <stdio.h>

#include "appraisal.h"

int main(void) {
    double x[] = {0, 1, 2, 3, 4, 5};
    double y[] = {1.0, 3.1, 4.9, 7.0, 9.1, 10.9};
    AppraisalOls *h = NULL;
    if (appraisal_ols_fit(x, 6, 1, y, &h) != APPRAISAL_STATUS_OK) {
        fprintf(stderr, "fit: %s\n", appraisal_last_error());
        return 1;
    }
    double b0, b1;
    appraisal_ols_coefficients(h, &b0, &b1, NULL, 1);
    AppraisalOlsStats s;
    appraisal_ols_stats(h, &s);
    printf("intercept %.6f slope %.6f r2 %.6f\n", b0, b1, s.r2);
    appraisal_ols_free(h);

    if (appraisal_ols_fit(NULL, 6, 1, y, &h) != APPRAISAL_STATUS_NULL_POINTER) {
        return 1;
    }
    printf("error: %s\n", appraisal_last_error());
    return fabs(b1 - 1.98) < 0.05 ? 0 : 1;
}
