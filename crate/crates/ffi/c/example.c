/* cc -Iinclude c/example.c target/debug/libmoddit_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "moddit.h"

int main(void) {
    MdLayout *layout = NULL;
    MdSparsityMap *map = NULL;
    MdIntensities *x = NULL;
    MdBlockMask *mask = NULL;
    double s[16];
    double err = 0.0;

    /* Key block 1 is dense, every other block is sparse. */
    for (int k = 0; k < 16; k++) s[k] = (k % 4 == 1) ? 0.0 : 1.0;

    if (md_layout_new(16, 4, 2, &layout) != MD_STATUS_OK ||
        md_sparsity_map_new(s, 4, &map) != MD_STATUS_OK ||
        md_decompose(map, layout, 1e-8, &x, &err) != MD_STATUS_OK ||
        md_mask_build(layout, x, NULL, 1, 0.5, MD_DIRECTION_ASCENDING, false, &mask) != MD_STATUS_OK) {
        fprintf(stderr, "moddit: %s\n", md_last_error());
        return 1;
    }
    printf("nae %g, sparsity ratio %g\n", err, md_block_mask_sparsity_ratio(mask));

    md_block_mask_free(mask);
    md_intensities_free(x);
    md_sparsity_map_free(map);
    md_layout_free(layout);
    return 0;
}
