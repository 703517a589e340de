#include <math.h>
#include <stdio.h>
#include "chrono_cdr.h"

int main(void) {
    double lats[] = {47.50, 47.52, 47.48};
    double lons[] = {19.00, 19.05, 19.08};
    CcdrTessellation *t = NULL;
    if (ccdr_tessellation_new(lats, lons, 3, 2.0, &t) != CCDR_STATUS_OK) {
        char *msg = ccdr_last_error();
        fprintf(stderr, "tessellation: %s\n", msg);
        ccdr_string_free(msg);
        return 1;
    }
    int64_t at = -1;
    ccdr_tessellation_locate(t, 47.52, 19.05, &at);
    ccdr_tessellation_free(t);

    double x[] = {1, 2, 3}, y[] = {6, 4, 2}, r = 0;
    ccdr_pearson(x, y, 3, &r);
    printf("site=%lld r=%.3f d=%.4f\n", (long long)at, r, ccdr_distance_km(47.5, 19.0, 47.5, 19.0136));
    return at == 1 && fabs(r + 1.0) < 1e-12 ? 0 : 1;
}
