#include <stdio.h>
#include <stdlib.h>

#include "caenet.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        CaenetStatus s_ = (call);                                          \
        if (s_ != CAENET_STATUS_OK) {                                      \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,        \
                    caenet_last_error());                                  \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    CaenetCae *cae = NULL;
    CHECK(caenet_cae_build(3, 8, 8, 2, 3, true, 0.2, 1, &cae));
    size_t n = caenet_cae_input_len(cae);
    double *x = malloc(n * sizeof *x);
    double *y = malloc(n * sizeof *y);
    for (size_t i = 0; i < n; i++) x[i] = (double)(i % 7) / 6.0;
    CHECK(caenet_cae_reconstruct(cae, x, n, y, n));

    uint32_t sizes[2] = {5, 4};
    CaenetCnn *cnn = NULL;
    CHECK(caenet_cnn_from_cae(cae, sizes, 2, 3, false, 2, &cnn));
    double p[3];
    uint32_t label = 0;
    CHECK(caenet_cnn_probabilities(cnn, x, n, p, 3));
    CHECK(caenet_cnn_predict(cnn, x, n, &label));

    if (caenet_cae_build(3, 50, 50, 2, 3, true, 0.2, 1, &cae) != CAENET_STATUS_CONFIG) return 2;

    printf("version %s inputs %zu label %u p %.6f %.6f %.6f\n", caenet_version(), n, label, p[0],
           p[1], p[2]);
    caenet_cnn_free(cnn);
    caenet_cae_free(cae);
    free(x);
    free(y);
    return 0;
}
