#include <math.h>
#include <stdio.h>
#include <string.h>
#include "millsurf.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s\n", #cond); return 1; } } while (0)

int main(int argc, char **argv) {
    double req = 0.0, sz = 0.0;
    CHECK(millsurf_effective_radius(0.0, 1.0, 5.0, 1.5, MILLSURF_RADIUS_FORM_AS_PRINTED, &req) == MILLSURF_STATUS_OK);
    CHECK(millsurf_predict_sz(0.14, 0.005, req, 1.5, MILLSURF_SZ_BRANCH_AS_PRINTED, &sz) == MILLSURF_STATUS_OK);
    CHECK(fabs(sz * 1000.0 - 1.633333) < 1e-5);

    CHECK(millsurf_effective_radius(95.0, 1.0, 5.0, 1.5, MILLSURF_RADIUS_FORM_AS_PRINTED, &req) == MILLSURF_STATUS_DOMAIN);
    CHECK(millsurf_last_error_message() != NULL);

    MillsurfHeightField *hf = NULL;
    CHECK(millsurf_heightfield_read_csv(argv[1], &hf) == MILLSURF_STATUS_OK);
    size_t nx = 0, ny = 0;
    CHECK(millsurf_heightfield_shape(hf, &nx, &ny, NULL, NULL) == MILLSURF_STATUS_OK);
    CHECK(nx == 3 && ny == 2);
    double z[6];
    CHECK(millsurf_heightfield_copy_heights(hf, z, 5) == MILLSURF_STATUS_BUFFER_TOO_SMALL);
    CHECK(millsurf_heightfield_copy_heights(hf, z, 6) == MILLSURF_STATUS_OK);
    CHECK(z[1] == 1.0 && isnan(z[5]));
    millsurf_heightfield_free(hf);

    MillsurfConfig *cfg = NULL;
    CHECK(millsurf_config_new(&cfg) == MILLSURF_STATUS_OK);
    CHECK(millsurf_config_set(cfg, "tool.radius=5") == MILLSURF_STATUS_CONFIG);
    millsurf_config_free(cfg);

    printf("ok %s\n", millsurf_version());
    (void)argc;
    return 0;
}
