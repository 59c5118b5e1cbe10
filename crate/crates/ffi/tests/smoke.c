#include <stdio.h>
#include <string.h>

#include "hermite_fp.h"

int main(void) {
    const double v[5] = {0.0, 0.0, -0.5, 0.0, 0.25};
    HfpMap *map = NULL;
    if (hfp_map_white(v, 5, 1.0, &map) != HFP_STATUS_OK) {
        fprintf(stderr, "%s\n", hfp_last_error());
        return 1;
    }
    double roots[4];
    size_t n = 0;
    if (hfp_map_fixed_points(map, 3.0, -2.0, 2.0, 101, roots, 4, &n) != HFP_STATUS_OK) {
        fprintf(stderr, "%s\n", hfp_last_error());
        return 1;
    }
    printf("roots %zu\n", n);
    hfp_map_free(map);

    HfpProblem *p = NULL;
    if (hfp_problem_white(v, 5, 1.0, -1.0, &p) == HFP_STATUS_OK || strlen(hfp_last_error()) == 0) {
        return 1;
    }
    return 0;
}
