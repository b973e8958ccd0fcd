/* Build: cargo build -p priorfuse-ffi --release
 * cc -Icrates/ffi/include crates/ffi/examples/smoke.c \
 *    target/release/libpriorfuse_ffi.a -lpthread -ldl -lm -o smoke */
#include <stdio.h>

#include "priorfuse.h"

int main(void) {
    const double v[] = {0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0};
    const uint32_t t[] = {0, 1, 2, 0, 2, 3};
    PfMesh *mesh = NULL;
    if (pf_mesh_new(v, 4, t, 2, &mesh) != PF_STATUS_OK) {
        fprintf(stderr, "pf_mesh_new: %s\n", pf_last_error_message());
        return 1;
    }
    PfMetrics m;
    if (pf_evaluate(mesh, mesh, 10000, 0.05, 0, &m) != PF_STATUS_OK) {
        fprintf(stderr, "pf_evaluate: %s\n", pf_last_error_message());
        pf_mesh_free(mesh);
        return 1;
    }
    printf("priorfuse %s: %zu triangles, chamfer %g, f-score %g\n", pf_version(), pf_mesh_triangle_count(mesh),
           m.chamfer_l1, m.f_score);
    PfMesh *missing = NULL;
    PfStatus s = pf_mesh_load_ply("/nonexistent.ply", &missing);
    printf("loading a missing file: status %d (%s)\n", (int)s, pf_last_error_message());
    pf_mesh_free(mesh);
    return 0;
}
