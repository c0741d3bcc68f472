// Demo optimization target for the offline pipeline. The EVAL markers inside
// the writable block drive the bundled marker-stage evaluators in place of a
// real Java toolchain.
public class ListScan {
    // EVOLVE-BLOCK-START
    public int scan(java.util.List<Integer> items) {
        int acc = 0;
        for (int i = 0; i < items.size(); i++) {
            acc += helper(items.get(i));
        }
        return acc;
    }
    // LEVEL0
    // EVAL:tests=4/4
    // EVAL:perf=0.75
    // EVAL:static=0.90
    // EVAL:judge=0.60
    // EVOLVE-BLOCK-END

    private int helper(int value) {
        return value * 2;
    }
}
