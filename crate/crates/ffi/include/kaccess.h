#ifndef KACCESS_H
#define KACCESS_H

#include <stddef.h>
#include <stdint.h>

// Status codes. Values 2 to 5 match the command-line exit codes.
typedef enum KaStatus {
  KA_STATUS_OK = 0,
  KA_STATUS_INVALID_ARGUMENT = 2,
  KA_STATUS_INVALID_INPUT = 3,
  KA_STATUS_NON_CONVERGENCE = 4,
  KA_STATUS_IO = 5,
  KA_STATUS_NULL_POINTER = 6,
  KA_STATUS_PANIC = 7,
} KaStatus;

// Opaque K-Access result.
typedef struct KaClustering KaClustering;

// Opaque accessibility matrix.
typedef struct KaMatrix KaMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *ka_last_error_message(void);

// `max(exp(-seconds), min_access)`. Pass `INFINITY` for an unreachable
// pair. Returns NaN for a negative or NaN time.
double ka_access_from_time(double seconds, double min_access);

// Copies `n * n` row-major entries into a new matrix whose floor value is
// `min_access`.
//
// # Safety
// `entries` must point to `n * n` readable doubles and `out` must be a
// valid place to store a pointer.
enum KaStatus ka_matrix_from_buffer(size_t n,
                                    const double *entries,
                                    double min_access,
                                    struct KaMatrix **out);

// Loads a matrix file (CSV, or JSON when the name ends in `.json`).
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid place to store
// a pointer.
enum KaStatus ka_matrix_read(const char *path, struct KaMatrix **out);

// # Safety
// `m` must be NULL or a handle from this library that was not freed yet.
void ka_matrix_free(struct KaMatrix *m);

// # Safety
// `m` must be NULL or a live matrix handle.
size_t ka_matrix_size(const struct KaMatrix *m);

// Entry `A[from, to]`, or NaN when out of range.
//
// # Safety
// `m` must be NULL or a live matrix handle.
double ka_matrix_get(const struct KaMatrix *m, size_t from, size_t to);

// Runs K-Access. `max_iterations == 0` selects the library default.
//
// # Safety
// `m` must be a live matrix handle and `out` a valid place to store a
// pointer.
enum KaStatus ka_k_access(const struct KaMatrix *m,
                          size_t k,
                          uint64_t seed,
                          size_t max_iterations,
                          struct KaClustering **out);

// # Safety
// `c` must be NULL or a handle from this library that was not freed yet.
void ka_clustering_free(struct KaClustering *c);

// # Safety
// `c` must be NULL or a live clustering handle.
size_t ka_clustering_k(const struct KaClustering *c);

// Number of samples the clustering covers.
//
// # Safety
// `c` must be NULL or a live clustering handle.
size_t ka_clustering_size(const struct KaClustering *c);

// Final objective `G`, or NaN for NULL.
//
// # Safety
// `c` must be NULL or a live clustering handle.
double ka_clustering_objective(const struct KaClustering *c);

// # Safety
// `c` must be NULL or a live clustering handle.
size_t ka_clustering_iterations(const struct KaClustering *c);

// Writes the `k` centroid sample indices into `out`.
//
// # Safety
// `c` must be a live clustering handle and `out` must have room for `len`
// values.
enum KaStatus ka_clustering_centroids(const struct KaClustering *c, size_t *out, size_t len);

// Writes, for every sample, the index of its centroid sample.
//
// # Safety
// `c` must be a live clustering handle and `out` must have room for `len`
// values.
enum KaStatus ka_clustering_assignment(const struct KaClustering *c, size_t *out, size_t len);

// Quality index of a clustering of `m` with singleton penalty `alpha`.
//
// # Safety
// `m` and `c` must be live handles and `out` a valid place to store a
// double.
enum KaStatus ka_quality_index(const struct KaMatrix *m,
                               const struct KaClustering *c,
                               double alpha,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KACCESS_H */
