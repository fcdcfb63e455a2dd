int release_twice(int *buf, int fail)
{
    free(buf);
    if (fail) {
        free(buf);
        return -1;
    }
    return 0;
}
