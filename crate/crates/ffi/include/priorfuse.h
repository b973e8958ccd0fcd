#ifndef PRIORFUSE_H
#define PRIORFUSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call. Zero is success.
typedef enum PfStatus {
  PF_STATUS_OK = 0,
  // A required pointer argument was null.
  PF_STATUS_NULL_POINTER = 1,
  // An argument or the data it points to violates a precondition.
  PF_STATUS_INVALID_INPUT = 2,
  // A file could not be read or written.
  PF_STATUS_IO = 3,
  // A file was read but its contents are malformed.
  PF_STATUS_PARSE = 4,
  // A library invariant failed or the library panicked; this is a bug.
  PF_STATUS_INTERNAL = 5,
} PfStatus;

// Posed frames loaded from a manifest.
typedef struct PfDataset PfDataset;

// Triangle mesh owned by the library.
typedef struct PfMesh PfMesh;

// Mesh comparison result; distances in meters.
typedef struct PfMetrics {
  double accuracy;
  double completion;
  double chamfer_l1;
  double normal_consistency;
  double f_score;
  double threshold;
  size_t sample_count;
} PfMetrics;

// Pinhole intrinsics in pixels.
typedef struct PfIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  size_t width;
  size_t height;
} PfIntrinsics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string after
// a success. The pointer stays valid until the next call on this thread.
const char *pf_last_error_message(void);

// Static, NUL-terminated library version.
const char *pf_version(void);

// Builds a mesh from `vertex_count` xyz triples and `triangle_count` index
// triples.
//
// # Safety
// `vertices` must point to `3 * vertex_count` doubles and `triangles` to
// `3 * triangle_count` integers; `out` must be writable.
enum PfStatus pf_mesh_new(const double *vertices,
                          size_t vertex_count,
                          const uint32_t *triangles,
                          size_t triangle_count,
                          struct PfMesh **out);

// Reads a binary little-endian PLY mesh.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PfStatus pf_mesh_load_ply(const char *path, struct PfMesh **out);

// Writes `mesh` as binary little-endian PLY, replacing `path` atomically.
//
// # Safety
// `mesh` must be a live handle and `path` a NUL-terminated string.
enum PfStatus pf_mesh_save_ply(const struct PfMesh *mesh, const char *path);

// Number of vertices; 0 for a null handle.
//
// # Safety
// `mesh` must be null or a live handle.
size_t pf_mesh_vertex_count(const struct PfMesh *mesh);

// Number of triangles; 0 for a null handle.
//
// # Safety
// `mesh` must be null or a live handle.
size_t pf_mesh_triangle_count(const struct PfMesh *mesh);

// Copies vertex positions into `out`, which holds `len` doubles and must
// have room for `3 * pf_mesh_vertex_count(mesh)`.
//
// # Safety
// `mesh` must be a live handle and `out` must point to `len` doubles.
enum PfStatus pf_mesh_copy_vertices(const struct PfMesh *mesh, double *out, size_t len);

// Copies triangle indices into `out`, which holds `len` integers and must
// have room for `3 * pf_mesh_triangle_count(mesh)`.
//
// # Safety
// `mesh` must be a live handle and `out` must point to `len` integers.
enum PfStatus pf_mesh_copy_triangles(const struct PfMesh *mesh, uint32_t *out, size_t len);

// Releases a mesh. Null is ignored.
//
// # Safety
// `mesh` must be null or a handle not yet freed.
void pf_mesh_free(struct PfMesh *mesh);

// Accuracy, completion, Chamfer-L1, normal consistency and F-score of
// `pred` against `gt` from `samples` surface points per mesh.
//
// # Safety
// `pred` and `gt` must be live handles; `out` must be writable.
enum PfStatus pf_evaluate(const struct PfMesh *pred,
                          const struct PfMesh *gt,
                          size_t samples,
                          double threshold,
                          uint64_t seed,
                          struct PfMetrics *out);

// Depth-normal consistency filter for one frame. `prior_normals` are in
// the camera frame; zero vectors mark missing priors. Removed pixels are
// zero in `out_depth`; `out_mask` is 1 where depth was kept. Either output
// may be null.
//
// # Safety
// `intrinsics` and `pose` (16 doubles) must be readable; `depth` holds
// `width * height` doubles, `prior_normals` three times that; the outputs,
// when non-null, hold `width * height` elements.
enum PfStatus pf_dnc_filter(const struct PfIntrinsics *intrinsics,
                            const double *pose,
                            const double *depth,
                            const double *prior_normals,
                            size_t k,
                            double tau_d_deg,
                            double *out_depth,
                            uint8_t *out_mask);

// Adaptive normal filter: keeps `prior_normals` where they lie within
// `tau_n_deg` of `rendered_normals`. Removed pixels are zero vectors in
// `out_normals`; `out_mask` is 1 where the prior was kept. Either output
// may be null.
//
// # Safety
// Both inputs hold `3 * width * height` doubles; the outputs, when
// non-null, hold `3 * width * height` doubles and `width * height` bytes.
enum PfStatus pf_anr_filter(size_t width,
                            size_t height,
                            const double *rendered_normals,
                            const double *prior_normals,
                            double tau_n_deg,
                            double *out_normals,
                            uint8_t *out_mask);

// Loads every frame named by a dataset manifest.
//
// # Safety
// `manifest_path` must be a NUL-terminated string; `out` must be writable.
enum PfStatus pf_dataset_load(const char *manifest_path, struct PfDataset **out);

// Number of frames; 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t pf_dataset_frame_count(const struct PfDataset *dataset);

// Releases a dataset. Null is ignored.
//
// # Safety
// `dataset` must be null or a handle not yet freed.
void pf_dataset_free(struct PfDataset *dataset);

// Filters, fuses and meshes `dataset`. `config_json` is a pipeline
// configuration object in JSON, or null for the defaults; absent keys take
// their defaults.
//
// # Safety
// `dataset` must be a live handle, `config_json` null or a NUL-terminated
// string, and `out` writable.
enum PfStatus pf_reconstruct(const struct PfDataset *dataset,
                             const char *config_json,
                             struct PfMesh **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRIORFUSE_H */
